//! Measures on `[0,1]` that are an atom at 1 plus a density constant on
//! each cell `I_l`, and the dual operator `T̂_i'` acting on them.
//!
//! For such a measure `μ` the image `T̂_i'μ` is again of this form:
//!
//! ```text
//! T̂_i'μ = atom1 · δ_1 + Σ_l (i+1) C(i+l+1, l) m_l · 1_{I_l} dλ,
//! m_l   = ∫ (1−y)^i y^l dμ(y)
//! ```
//!
//! Norms follow `‖μ‖_TV = |μ|([0,1])`, so two mutually singular probability
//! measures are at distance 2.

mod beta;

use crate::seqcore::{self, cell_left, cell_len, truncated_pmf};
use crate::{Error, Result};
use beta::BetaTransform;
use std::fmt::Write as _;

/// Cap on the number of cells any measure may grow to.
pub const MAX_CELLS: usize = 1 << 24;

/// A value together with a certified half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified {
    pub value: f64,
    pub slack: f64,
}

impl Certified {
    pub fn lower(&self) -> f64 {
        self.value - self.slack
    }

    pub fn upper(&self) -> f64 {
        self.value + self.slack
    }

    pub fn contains(&self, v: f64) -> bool {
        (v - self.value).abs() <= self.slack
    }
}

/// Atom at 1 plus a density `coeffs[l]` on `I_l`, `l < J`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMeasure {
    pub i: u32,
    pub atom1: f64,
    pub coeffs: Vec<f64>,
    /// Bound on the mass this representation does not account for.
    pub tail_mass_bound: f64,
    /// Bound on `Σ_l |coeffs[l] − exact_l| |I_l|` from approximate arithmetic.
    pub coeff_error: f64,
}

impl PartitionMeasure {
    pub fn new(i: u32, atom1: f64, coeffs: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        seqcore::check_i(i)?;
        if !(atom1 >= 0.0) || !(tail_mass_bound >= 0.0) {
            return Err(Error::domain("atom and tail bound must be nonnegative"));
        }
        if coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::domain(
                "density coefficients must be finite and nonnegative",
            ));
        }
        Ok(PartitionMeasure {
            i,
            atom1,
            coeffs,
            tail_mass_bound,
            coeff_error: 0.0,
        })
    }

    /// The point mass at 1.
    pub fn dirac_one(i: u32) -> Result<Self> {
        PartitionMeasure::new(i, 1.0, Vec::new(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty() && self.atom1 == 0.0
    }

    /// `γ_l = coeffs[l] |I_l|`.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * cell_len(self.i, l as u64))
            .collect()
    }

    /// Accounted mass `atom1 + Σ coeffs[l] |I_l|`.
    pub fn mass(&self) -> f64 {
        self.atom1 + compensated_sum(self.cell_masses().into_iter())
    }

    /// Total uncertainty carried into norms: tail plus coefficient error.
    pub fn slack(&self) -> f64 {
        self.tail_mass_bound + self.coeff_error
    }

    /// CSV with columns `l,left,right,coeff` and trailing metadata rows.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("l,left,right,coeff\n");
        for (l, c) in self.coeffs.iter().enumerate() {
            let l64 = l as u64;
            let _ = writeln!(
                s,
                "{l},{},{},{c}",
                cell_left(self.i, l64),
                cell_left(self.i, l64 + 1)
            );
        }
        let _ = writeln!(s, "atom1,,,{}", self.atom1);
        let _ = writeln!(s, "tail_mass_bound,,,{}", self.tail_mass_bound);
        let _ = writeln!(s, "coeff_error,,,{}", self.coeff_error);
        let _ = writeln!(s, "i,,,{}", self.i);
        s
    }

    /// Inverse of [`PartitionMeasure::to_csv`]; comment lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut coeffs = Vec::new();
        let (mut atom1, mut tail, mut err, mut i) = (0.0, 0.0, 0.0, None);
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with("l,") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("bad row {line:?}")));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad number {s:?}")))
            };
            match cols[0] {
                "atom1" => atom1 = num(cols[3])?,
                "tail_mass_bound" => tail = num(cols[3])?,
                "coeff_error" => err = num(cols[3])?,
                "i" => i = Some(num(cols[3])? as u32),
                _ => coeffs.push(num(cols[3])?),
            }
        }
        let i = i.ok_or_else(|| Error::Parse("missing i row".into()))?;
        let mut m = PartitionMeasure::new(i, atom1, coeffs, tail)?;
        m.coeff_error = err;
        Ok(m)
    }
}

fn compensated_sum(it: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// `T̂_i'δ_x`: density `α_l(x)` on `I_l`, truncated where the β-tail is ≤ eps.
pub fn delta_image(i: u32, x: f64, eps: f64) -> Result<PartitionMeasure> {
    seqcore::check_i(i)?;
    if x == 1.0 {
        return Err(Error::domain(
            "x = 1 has no density image; use PartitionMeasure::dirac_one",
        ));
    }
    seqcore::check_x_open(x)?;
    if !(eps > 0.0) {
        return Err(Error::domain("eps must be positive"));
    }
    let (betas, tail) = truncated_pmf(i, x, eps)?;
    let coeffs = betas
        .iter()
        .enumerate()
        .map(|(l, b)| b / cell_len(i, l as u64))
        .collect();
    PartitionMeasure::new(i, 0.0, coeffs, tail)
}

/// Lebesgue measure restricted to the first `J` cells; the tail bound is
/// the measure `i/(i+J)` of the uncovered part `[J/(i+J), 1)`.
pub fn lebesgue_measure(i: u32, len: usize) -> Result<PartitionMeasure> {
    seqcore::check_i(i)?;
    if len == 0 {
        return Err(Error::domain("J must be positive"));
    }
    PartitionMeasure::new(
        i,
        0.0,
        vec![1.0; len],
        seqcore::cell_left_complement(i, len as u64),
    )
}

/// The smallest number of cells for which λ's uncovered mass is ≤ eps.
pub fn lebesgue_cells_for(i: u32, eps: f64) -> usize {
    // i/(i+J) ≤ eps
    ((i as f64 / eps) - i as f64).ceil().max(1.0) as usize
}

/// `m_l = ∫ (1−y)^i y^l dμ` for `l ≤ l_max`; the atom at 1 contributes 0.
///
/// Computed from the incomplete beta representation rather than by
/// expanding `(1−y)^i`, whose alternating terms cancel for large `l`.
pub fn moments(mu: &PartitionMeasure, l_max: usize) -> Vec<f64> {
    let mut t = BetaTransform::new(mu.i, &mu.coeffs);
    let i = mu.i as u64;
    (0..=l_max as u64)
        .map(|l| {
            let (c, _) = t.next_coeff();
            // m_l = c'_l · B(l+1, i+1)
            let mut b = c;
            for k in 1..=i {
                b *= k as f64 / (l + k) as f64;
            }
            b / (l + i + 1) as f64
        })
        .collect()
}

/// `T̂_i'μ`.
///
/// The output keeps the input length `J` unless the mass pushed beyond the
/// last cell would take the tail bound above eps, in which case `J` is
/// doubled until it does not.
pub fn dual_apply(i: u32, mu: &PartitionMeasure, eps: f64) -> Result<PartitionMeasure> {
    if !(eps > 0.0) {
        return Err(Error::domain("eps must be positive"));
    }
    if mu.tail_mass_bound > eps / 2.0 {
        return Err(Error::domain(format!(
            "input tail bound {:.3e} exceeds eps/2 = {:.3e}",
            mu.tail_mass_bound,
            eps / 2.0
        )));
    }
    dual_step(i, mu, eps - mu.tail_mass_bound, 0, false)
}

/// `T̂_i'μ` losing at most `max_leak` of mass past the last output cell,
/// with at least `min_len` output cells. With `trim`, trailing cells are
/// moved into the tail bound while that uses at most half of the unused
/// allowance, so long runs do not keep cells they no longer need.
pub(crate) fn dual_step(
    i: u32,
    mu: &PartitionMeasure,
    max_leak: f64,
    min_len: usize,
    trim: bool,
) -> Result<PartitionMeasure> {
    if mu.i != i {
        return Err(Error::domain(format!(
            "measure lives on the i = {} partition",
            mu.i
        )));
    }
    if !(max_leak > 0.0) {
        return Err(Error::domain("leak allowance must be positive"));
    }
    let mut len = mu.coeffs.len();
    while len > 0 && mu.coeffs[len - 1] == 0.0 {
        len -= 1;
    }
    let mut t = BetaTransform::new(i, &mu.coeffs[..len]);
    let m_in = t.input_mass();
    let mut coeffs = Vec::new();
    let mut out_mass = 0.0;
    let mut out_comp = 0.0;
    let mut err_mass = 0.0;
    let mut target = mu.coeffs.len().max(min_len);
    loop {
        while coeffs.len() < target {
            let l = coeffs.len() as u64;
            let (c, e) = t.next_coeff();
            let h = cell_len(i, l);
            // Kahan summation of the output mass
            let y = c * h - out_comp;
            let s = out_mass + y;
            out_comp = (s - out_mass) - y;
            out_mass = s;
            err_mass += e * h;
            coeffs.push(c.max(0.0));
        }
        let quad = err_mass + t.dropped_error();
        let leak = (m_in - out_mass + quad).max(0.0) + 1e-15 * m_in + 1e-17 * target as f64;
        let tail = mu.tail_mass_bound + leak;
        if len == 0 || leak <= max_leak {
            let mut tail = tail;
            if trim {
                let budget = 0.5 * (max_leak - leak);
                let mut cut = 0.0;
                while coeffs.len() > min_len.max(1) {
                    let l = coeffs.len() - 1;
                    let m = coeffs[l] * cell_len(i, l as u64);
                    if cut + m > budget {
                        break;
                    }
                    cut += m;
                    coeffs.pop();
                }
                tail += cut;
            }
            return Ok(PartitionMeasure {
                i,
                atom1: mu.atom1,
                coeffs,
                tail_mass_bound: tail,
                coeff_error: mu.coeff_error + quad,
            });
        }
        if target >= MAX_CELLS {
            return Err(Error::accuracy(
                "dual image needs more cells than allowed",
                tail,
                mu.tail_mass_bound + max_leak,
            ));
        }
        target = (target.max(1) * 2).min(MAX_CELLS);
    }
}

/// `γ_l(x) = T̂_i'²δ_x(I_l)` for `l < J`.
pub fn gamma_weights(i: u32, x: f64, len: usize, eps: f64) -> Result<Vec<f64>> {
    let nu = delta_image(i, x, eps / 2.0)?;
    let out = dual_step(i, &nu, eps - nu.tail_mass_bound, len, false)?;
    let mut g = out.cell_masses();
    g.truncate(len);
    Ok(g)
}

fn check_same(mu: &PartitionMeasure, nu: &PartitionMeasure) -> Result<()> {
    if mu.i != nu.i {
        return Err(Error::domain(format!(
            "measures live on different partitions (i = {} and {})",
            mu.i, nu.i
        )));
    }
    Ok(())
}

/// `‖μ − ν‖_TV` of the represented parts, with both slacks as half-width.
pub fn tv_distance(mu: &PartitionMeasure, nu: &PartitionMeasure) -> Result<Certified> {
    check_same(mu, nu)?;
    let n = mu.coeffs.len().max(nu.coeffs.len());
    let get = |v: &[f64], l: usize| v.get(l).copied().unwrap_or(0.0);
    let density = compensated_sum(
        (0..n).map(|l| (get(&mu.coeffs, l) - get(&nu.coeffs, l)).abs() * cell_len(mu.i, l as u64)),
    );
    Ok(Certified {
        value: density + (mu.atom1 - nu.atom1).abs(),
        slack: mu.slack() + nu.slack(),
    })
}

/// `‖μ − λ‖_TV` against the full Lebesgue measure, whose part beyond the
/// represented cells is known exactly.
pub fn tv_to_lebesgue(mu: &PartitionMeasure) -> Certified {
    let n = mu.coeffs.len();
    let density = compensated_sum(
        mu.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| (c - 1.0).abs() * cell_len(mu.i, l as u64)),
    );
    Certified {
        value: density + seqcore::cell_left_complement(mu.i, n as u64) + mu.atom1,
        slack: mu.slack(),
    }
}

/// `‖μ ∧ ν‖_TV = Σ_l min(c_l, d_l)|I_l| + min(atoms)`.
pub fn lattice_min_mass(mu: &PartitionMeasure, nu: &PartitionMeasure) -> Result<Certified> {
    check_same(mu, nu)?;
    let n = mu.coeffs.len().min(nu.coeffs.len());
    let density =
        compensated_sum((0..n).map(|l| mu.coeffs[l].min(nu.coeffs[l]) * cell_len(mu.i, l as u64)));
    Ok(Certified {
        value: density + mu.atom1.min(nu.atom1),
        slack: mu.slack() + nu.slack(),
    })
}

/// `‖T̂'²δ_x − T̂'δ_x‖_TV` and the wedge `‖T̂'²δ_x ∧ T̂'δ_x‖_TV`.
pub fn gap_and_wedge(i: u32, x: f64, eps: f64) -> Result<(Certified, Certified)> {
    let one = delta_image(i, x, eps / 2.0)?;
    let two = dual_apply(i, &one, eps)?;
    Ok((tv_distance(&two, &one)?, lattice_min_mass(&two, &one)?))
}

/// `‖T̂'²δ_x − T̂'δ_x‖_TV`.
pub fn gap02(i: u32, x: f64, eps: f64) -> Result<Certified> {
    Ok(gap_and_wedge(i, x, eps)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_image_examples() {
        let d = delta_image(1, 0.0, 1e-12).unwrap();
        assert_eq!(d.coeffs, vec![2.0]);
        assert_eq!(d.atom1, 0.0);
        assert!((d.mass() - 1.0).abs() < 1e-15);
        let d = delta_image(1, 0.5, 1e-12).unwrap();
        for (u, v) in d.coeffs.iter().zip([1.0, 1.5, 1.5]) {
            assert!((u - v).abs() < 1e-14);
        }
        let d = delta_image(2, 0.3, 1e-12).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-10);
        assert!(delta_image(1, 1.0, 1e-12).is_err());
    }

    #[test]
    fn lebesgue_examples() {
        let l = lebesgue_measure(1, 1).unwrap();
        assert_eq!(l.tail_mass_bound, 0.5);
        let l = lebesgue_measure(1, 999).unwrap();
        assert!((l.tail_mass_bound - 1.0 / 1000.0).abs() < 1e-18);
        let l = lebesgue_measure(3, 2).unwrap();
        assert!((l.mass() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn moments_examples() {
        let lam = lebesgue_measure(1, 1 << 20).unwrap();
        let m = moments(&lam, 1);
        assert!((m[0] - 0.5).abs() < 1e-11);
        assert!((m[1] - 1.0 / 6.0).abs() < 1e-11);
        let d = PartitionMeasure::dirac_one(3).unwrap();
        assert!(moments(&d, 5).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dual_examples() {
        let d1 = PartitionMeasure::dirac_one(1).unwrap();
        let out = dual_apply(1, &d1, 1e-9).unwrap();
        assert_eq!(out.atom1, 1.0);
        assert!(out.coeffs.is_empty());

        let nu = delta_image(1, 0.0, 1e-12).unwrap();
        let out = dual_apply(1, &nu, 1e-9).unwrap();
        assert!((out.coeffs[0] - 1.5).abs() < 1e-14);
        assert!((out.cell_masses()[0] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn norms_examples() {
        let lam = lebesgue_measure(1, 1 << 16).unwrap();
        let d1 = PartitionMeasure::dirac_one(1).unwrap();
        let t = tv_distance(&d1, &lam).unwrap();
        assert!((t.value - 2.0).abs() <= t.slack + 1e-12);
        let w = lattice_min_mass(&d1, &lam).unwrap();
        assert_eq!(w.value, 0.0);
        let nu = delta_image(1, 0.0, 1e-12).unwrap();
        let t = tv_distance(&nu, &lam).unwrap();
        assert!((t.value - 1.0).abs() <= t.slack + 1e-12);
        assert!((tv_to_lebesgue(&nu).value - 1.0).abs() < 1e-15);
        assert!((lattice_min_mass(&nu, &lam).unwrap().value - 0.5).abs() < 1e-15);
        assert_eq!(tv_distance(&nu, &nu).unwrap().value, 0.0);
        assert!(tv_distance(&nu, &lebesgue_measure(2, 3).unwrap()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let nu = delta_image(2, 0.7, 1e-9).unwrap();
        let back = PartitionMeasure::from_csv(&nu.to_csv("config")).unwrap();
        assert_eq!(back, nu);
    }
}
