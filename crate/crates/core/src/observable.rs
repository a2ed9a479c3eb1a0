//! Observables on `[0,1]`: anything that can be evaluated pointwise.

use crate::{Error, Result};
use std::fmt;

/// A real function on `[0,1]`.
pub trait Observable {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Observable for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// A polynomial in `t` with coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `t^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Polynomial::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `∫₀¹ p`, exactly up to rounding.
    pub fn integral01(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k as f64 + 1.0))
            .sum()
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    fn add(&self, o: &Polynomial, sign: f64) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut c = vec![0.0; n];
        for (k, v) in self.coeffs.iter().enumerate() {
            c[k] += v;
        }
        for (k, v) in o.coeffs.iter().enumerate() {
            c[k] += sign * v;
        }
        Polynomial::new(c)
    }

    fn mul(&self, o: &Polynomial) -> Polynomial {
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (a, u) in self.coeffs.iter().enumerate() {
            for (b, v) in o.coeffs.iter().enumerate() {
                c[a + b] += u * v;
            }
        }
        Polynomial::new(c)
    }

    /// Parses expressions such as `3*t^2-4*t`, `2*(t-1)^3 + 0.5`.
    pub fn parse(src: &str) -> Result<Polynomial> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let poly = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input in {src:?}"
            )));
        }
        Ok(poly)
    }
}

impl Observable for Polynomial {
    fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && !(first && k == 0) {
                continue;
            }
            let mag = c.abs();
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if c < 0.0 { "-" } else { "+" })?;
            }
            first = false;
            match k {
                0 => write!(f, "{mag}")?,
                _ => {
                    if mag != 1.0 {
                        write!(f, "{mag}*")?;
                    }
                    write!(f, "t")?;
                    if k > 1 {
                        write!(f, "^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    T,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            ' ' | '\t' => {}
            't' | 'x' => out.push(Tok::T),
            '+' => out.push(Tok::Plus),
            '-' => out.push(Tok::Minus),
            '*' => out.push(Tok::Star),
            '^' => out.push(Tok::Caret),
            '(' => out.push(Tok::LParen),
            ')' => out.push(Tok::RParen),
            d if d.is_ascii_digit() || d == '.' => {
                let start = k;
                while k + 1 < chars.len() && (chars[k + 1].is_ascii_digit() || chars[k + 1] == '.')
                {
                    k += 1;
                }
                if k + 1 < chars.len() && (chars[k + 1] == 'e' || chars[k + 1] == 'E') {
                    k += 1;
                    if k + 1 < chars.len() && (chars[k + 1] == '-' || chars[k + 1] == '+') {
                        k += 1;
                    }
                    while k + 1 < chars.len() && chars[k + 1].is_ascii_digit() {
                        k += 1;
                    }
                }
                let s: String = chars[start..=k].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
                out.push(Tok::Num(v));
            }
            other => return Err(Error::Parse(format!("unexpected character {other:?}"))),
        }
        k += 1;
    }
    if out.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            let sign = match t {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.add(&rhs, sign);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = acc.mul(&rhs);
                }
                // implicit product such as `3t` or `2(t-1)`
                Some(Tok::T) | Some(Tok::LParen) => {
                    let rhs = self.unary()?;
                    acc = acc.mul(&rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.unary()?.mul(&Polynomial::constant(-1.0)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let e = match self.tokens.get(self.pos) {
                Some(Tok::Num(v)) if *v >= 0.0 && v.fract() == 0.0 && *v <= 64.0 => *v as usize,
                _ => return Err(Error::Parse("exponent must be an integer in 0..=64".into())),
            };
            self.pos += 1;
            let mut out = Polynomial::constant(1.0);
            for _ in 0..e {
                out = out.mul(&base);
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Polynomial::constant(v)),
            Tok::T => Ok(Polynomial::monomial(1)),
            Tok::LParen => {
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(Error::Parse("missing ')'".into()));
                }
                self.pos += 1;
                Ok(inner)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

/// Named polynomial observables used by the experiments and the CLI.
pub fn observable_bank() -> Vec<(&'static str, Polynomial)> {
    [
        "1",
        "5",
        "t",
        "1-t",
        "t^2",
        "t^3",
        "3*t^2-4*t",
        "2*t^3-3*t^2+t",
        "6*t^2-8*t+1",
        "4*t^3-3*t",
        "t^4-1.6*t",
        "t^4-2*t",
    ]
    .into_iter()
    .map(|s| (s, Polynomial::parse(s).expect("bank entries parse")))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let p = Polynomial::parse("3*t^2-4*t").unwrap();
        assert_eq!(p.coeffs(), &[0.0, -4.0, 3.0]);
        let q = Polynomial::parse("2*(t-1)^2 + 0.5").unwrap();
        assert_eq!(q.coeffs(), &[2.5, -4.0, 2.0]);
        assert_eq!(Polynomial::parse("-t").unwrap().coeffs(), &[0.0, -1.0]);
        assert_eq!(Polynomial::parse("3t").unwrap().coeffs(), &[0.0, 3.0]);
        assert!(Polynomial::parse("t^").is_err());
        assert!(Polynomial::parse("sin(t)").is_err());
        assert!(Polynomial::parse("").is_err());
    }

    #[test]
    fn display_round_trips() {
        for (s, p) in observable_bank() {
            let again = Polynomial::parse(&p.to_string()).unwrap();
            assert_eq!(again, p, "{s}");
        }
    }

    #[test]
    fn integrals() {
        assert_eq!(Polynomial::parse("3*t^2-4*t").unwrap().integral01(), -1.0);
        assert_eq!(
            Polynomial::parse("2*t^3-3*t^2+t").unwrap().integral01(),
            0.0
        );
    }
}
