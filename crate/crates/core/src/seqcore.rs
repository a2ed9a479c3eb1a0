//! Binomial coefficients in log space and the weight sequences
//!
//! ```text
//! α_j(x) = (i+1) C(i+j+1, j) (1−x)^i x^j
//! β_j(x) = C(i+j−1, j) (1−x)^i x^j = α_j(x) |I_j|
//! ```
//!
//! `β_·(x)` is the negative binomial pmf with shape `i` and success
//! probability `1−x`, so it sums to one.

use crate::{Error, Result};

/// Upper limit on the number of series terms any routine will generate.
pub const MAX_TERMS: u64 = 1 << 28;

// Terms between re-anchoring a recurrence on its closed form.
const ANCHOR_EVERY: u64 = 512;

/// Left endpoint `j/(i+j)` of the cell `I_j`.
#[inline]
pub fn cell_left(i: u32, j: u64) -> f64 {
    j as f64 / (i as f64 + j as f64)
}

/// `1 − j/(i+j) = i/(i+j)`, computed without cancellation.
#[inline]
pub fn cell_left_complement(i: u32, j: u64) -> f64 {
    i as f64 / (i as f64 + j as f64)
}

/// Length `i/((i+j)(i+j+1))` of the cell `I_j`.
#[inline]
pub fn cell_len(i: u32, j: u64) -> f64 {
    let a = i as f64 + j as f64;
    i as f64 / (a * (a + 1.0))
}

fn exact_binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for m in 1..=k as u128 {
        c = c * (n as u128 - k as u128 + m) / m;
    }
    c
}

// ln Γ(m+1) − (m+½) ln m + m − ½ ln 2π, for m > 30.
fn stirling_remainder(m: f64) -> f64 {
    let r = 1.0 / m;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
}

/// `ln C(n, k)`.
///
/// Small `n` go through exact integer arithmetic, a short factor `min(k,n−k)`
/// through a direct sum of logarithms, and the rest through Stirling's
/// series written so that no two large quantities are subtracted.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!(
            "log_binomial: k = {k} exceeds n = {n}"
        )));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if n <= 100 {
        return Ok((exact_binomial(n, k) as f64).ln());
    }
    if k <= 30 {
        let base = (n - k) as f64;
        let s: f64 = (1..=k).map(|m| ((base + m as f64) / m as f64).ln()).sum();
        return Ok(s);
    }
    let nf = n as f64;
    let kf = k as f64;
    let rf = (n - k) as f64;
    let entropy = kf * (nf / kf).ln() + rf * (kf / rf).ln_1p();
    let gauss = 0.5 * (nf / (2.0 * std::f64::consts::PI * kf * rf)).ln();
    Ok(entropy + gauss + stirling_remainder(nf) - stirling_remainder(kf) - stirling_remainder(rf))
}

/// `Σ_{k=1}^{s−1} ln((j+k)/k) = ln C(s+j−1, j)`.
fn log_rising(s: u32, j: u64) -> f64 {
    (1..s)
        .map(|k| ((j as f64 + k as f64) / k as f64).ln())
        .sum()
}

pub(crate) fn check_x_open(x: f64) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} must lie in [0, 1)")));
    }
    Ok(())
}

pub(crate) fn check_i(i: u32) -> Result<()> {
    if i == 0 {
        return Err(Error::domain("i must be a positive integer"));
    }
    Ok(())
}

/// Streaming negative binomial pmf `p_j = C(s+j−1, j)(1−x)^s x^j`.
///
/// Shape `i` gives `β_j`; shape `i+1` gives the Meyer-König–Zeller weights.
#[derive(Debug, Clone)]
pub struct NegBinomial {
    s: u32,
    x: f64,
    ln_x: f64,
    ln_1mx: f64,
    j: u64,
    cur: f64,
}

impl NegBinomial {
    pub fn new(s: u32, x: f64) -> Self {
        let ln_1mx = (-x).ln_1p();
        let mut nb = NegBinomial {
            s,
            x,
            ln_x: x.ln(),
            ln_1mx,
            j: 0,
            cur: 0.0,
        };
        nb.cur = nb.closed_form(0);
        nb
    }

    fn closed_form(&self, j: u64) -> f64 {
        if j == 0 {
            return (self.s as f64 * self.ln_1mx).exp();
        }
        if self.x == 0.0 {
            return 0.0;
        }
        (self.s as f64 * self.ln_1mx + j as f64 * self.ln_x + log_rising(self.s, j)).exp()
    }

    /// Index of the current term.
    pub fn index(&self) -> u64 {
        self.j
    }

    /// Current term `p_j`.
    pub fn value(&self) -> f64 {
        self.cur
    }

    /// Ratio `p_{j+1}/p_j` at the current index.
    pub fn ratio(&self) -> f64 {
        self.x * (self.s as f64 + self.j as f64) / (self.j as f64 + 1.0)
    }

    /// Certified bound on `Σ_{k≥j} p_k`, or infinity while the ratios are ≥ 1.
    ///
    /// The ratio `x(s+j)/(j+1)` is nonincreasing in `j`, so the tail is
    /// dominated by a geometric series once it drops below one.
    pub fn tail_from_here(&self) -> f64 {
        let r = self.ratio();
        if r < 1.0 {
            self.cur / (1.0 - r)
        } else {
            f64::INFINITY
        }
    }

    pub fn advance(&mut self) {
        let r = self.ratio();
        self.j += 1;
        if self.j.is_multiple_of(ANCHOR_EVERY) || self.cur < 1e-250 {
            self.cur = self.closed_form(self.j);
        } else {
            self.cur *= r;
        }
    }
}

/// Smallest `J ≥ 1` for which the certified tail bound on `Σ_{j≥J} p_j` is ≤ eps.
/// Returns `(J, p_0..p_{J−1}, bound)`.
pub(crate) fn truncated_pmf(s: u32, x: f64, eps: f64) -> Result<(Vec<f64>, f64)> {
    let mut nb = NegBinomial::new(s, x);
    let mut terms = Vec::new();
    loop {
        terms.push(nb.value());
        nb.advance();
        let bound = nb.tail_from_here();
        if bound <= eps {
            return Ok((terms, bound));
        }
        if terms.len() as u64 >= MAX_TERMS {
            return Err(Error::accuracy(
                "series truncation exceeded the term limit",
                bound,
                eps,
            ));
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("eps = {eps} must be positive")));
    }
    Ok(())
}

/// `[β_0(x), …, β_{J−1}(x)]`.
pub fn beta_weights(i: u32, x: f64, len: usize) -> Result<Vec<f64>> {
    check_i(i)?;
    check_x_open(x)?;
    if len == 0 {
        return Err(Error::domain("J must be positive"));
    }
    let mut nb = NegBinomial::new(i, x);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(nb.value());
        nb.advance();
    }
    Ok(out)
}

/// `[α_0(x), …, α_{J−1}(x)]`, obtained as `β_j / |I_j|`.
pub fn alpha_weights(i: u32, x: f64, len: usize) -> Result<Vec<f64>> {
    let b = beta_weights(i, x, len)?;
    Ok(b.iter()
        .enumerate()
        .map(|(j, v)| v / cell_len(i, j as u64))
        .collect())
}

/// Smallest `J` whose certified β-tail bound is ≤ eps.
pub fn truncation_index(i: u32, x: f64, eps: f64) -> Result<usize> {
    check_i(i)?;
    check_x_open(x)?;
    check_eps(eps)?;
    Ok(truncated_pmf(i, x, eps)?.0.len())
}

/// The pivot `j_x`: the index of the cell containing `x`.
pub fn pivot_index(i: u32, x: f64) -> Result<u64> {
    check_i(i)?;
    check_x_open(x)?;
    let guess = (i as f64 * x / (1.0 - x)).floor();
    if guess >= MAX_TERMS as f64 * 64.0 {
        return Err(Error::domain(format!("x = {x} is too close to 1")));
    }
    let mut j = guess as u64;
    while j > 0 && cell_left(i, j) > x {
        j -= 1;
    }
    while cell_left(i, j + 1) <= x {
        j += 1;
    }
    Ok(j)
}

/// `(⌊(i+1)x/(1−x)⌋, ⌊(i−1)x/(1−x)⌋)` without domain checks.
pub(crate) fn peak_formulas(i: u32, x: f64) -> (u64, u64) {
    let q = x / (1.0 - x);
    (
        ((i as f64 + 1.0) * q).floor() as u64,
        ((i as f64 - 1.0) * q).floor() as u64,
    )
}

/// Formula indices of the maxima of `α_·(x)` and `β_·(x)`; needs `x > 1/(i+2)`.
pub fn argmax_indices(i: u32, x: f64) -> Result<(u64, u64)> {
    check_i(i)?;
    if !(x > 1.0 / (i as f64 + 2.0) && x < 1.0) {
        return Err(Error::domain(format!(
            "x = {x} must lie in (1/(i+2), 1) = ({}, 1)",
            1.0 / (i as f64 + 2.0)
        )));
    }
    Ok(peak_formulas(i, x))
}

/// `C_x = Σ β_j(x)` over `⌊(1−r) j_x⌋ ≤ j ≤ j_x`.
pub fn window_mass(i: u32, x: f64, r: f64) -> Result<f64> {
    let (lo, hi) = window(i, x, r)?;
    let b = beta_weights(i, x, hi as usize + 1)?;
    Ok(b[lo as usize..].iter().sum())
}

/// The index window `[⌊(1−r) j_x⌋, j_x]`.
pub fn window(i: u32, x: f64, r: f64) -> Result<(u64, u64)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("r = {r} must lie in (0, 1)")));
    }
    let jx = pivot_index(i, x)?;
    Ok((((1.0 - r) * jx as f64).floor() as u64, jx))
}

/// The weight sequences for one `(i, x)` with their landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct KantorovichWeights {
    pub i: u32,
    pub x: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub pivot: u64,
    pub alpha_peak: u64,
    pub beta_peak: u64,
    /// Upper bound on `Σ_{j≥J} β_j(x)`.
    pub tail_bound: f64,
}

impl KantorovichWeights {
    /// Stores terms up to `truncation_index(i, x, eps)`.
    pub fn new(i: u32, x: f64, eps: f64) -> Result<Self> {
        check_i(i)?;
        check_x_open(x)?;
        check_eps(eps)?;
        let (betas, tail_bound) = truncated_pmf(i, x, eps)?;
        let alphas = betas
            .iter()
            .enumerate()
            .map(|(j, b)| b / cell_len(i, j as u64))
            .collect();
        let (alpha_peak, beta_peak) = peak_formulas(i, x);
        Ok(KantorovichWeights {
            i,
            x,
            alphas,
            betas,
            pivot: pivot_index(i, x)?,
            alpha_peak,
            beta_peak,
            tail_bound,
        })
    }

    /// Number of stored terms.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}
