//! Convergence experiments built on the operators and measures.

use crate::grid::GridSpec;
use crate::measures::{self, Certified, PartitionMeasure};
use crate::observable::Observable;
use crate::operators::{bernstein_node_matrix, GridDynamics, OperatorKind, OperatorSpec};
use crate::quadrature::integrate_adaptive;
use crate::seqcore::{self, beta_weights, window};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Sup-norm distances `‖T^m f − c‖` over a grid, and what they say.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub operator: OperatorSpec,
    pub observable_id: String,
    pub m_values: Vec<usize>,
    pub sup_errors: Vec<f64>,
    pub rate_estimate: Option<f64>,
    pub verdict: Verdict,
    pub target_constant: f64,
    /// Set when the target is the affine function `c + slope·x` rather
    /// than a constant.
    pub target_slope: Option<f64>,
    /// Lower bound on every sup error, when one is known: `|f(1) − ∫f|`.
    pub certified_floor: Option<f64>,
}

impl ConvergenceReport {
    pub fn final_error(&self) -> f64 {
        *self.sup_errors.last().expect("reports are nonempty")
    }

    /// CSV with columns `m,sup_error,lower_interval,upper_interval`.
    ///
    /// The interval brackets the distance of the exact iterate from the
    /// target, widened by the grid tolerance.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("m,sup_error,lower_interval,upper_interval\n");
        let tol = self.operator.eps;
        for (m, e) in self.m_values.iter().zip(&self.sup_errors) {
            let lo = (e - tol).max(self.certified_floor.unwrap_or(0.0)).max(0.0);
            let _ = writeln!(s, "{m},{e:e},{lo:e},{:e}", e + tol);
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "observable": self.observable_id,
            "operator": self.operator,
            "verdict": self.verdict,
            "rate": self.rate_estimate,
            "target": self.target_constant,
            "target_slope": self.target_slope,
            "certified_floor": self.certified_floor,
            "final_m": self.m_values.last(),
            "final_sup_error": self.final_error(),
        })
    }
}

/// Whether `f(1) = ∫₀¹ f` within tol; returns `(admissible, f(1), ∫f)`.
pub fn acu_rasa_verdict(f: &dyn Observable, tol: f64) -> Result<(bool, f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::domain("tol must be positive"));
    }
    let integral = integrate_adaptive(&|t| f.eval(t), 0.0, 1.0, tol / 10.0)?;
    let f1 = f.eval(1.0);
    Ok(((f1 - integral).abs() <= tol, f1, integral))
}

/// Iterates `T̂_i` on the standard grid until the sup distance to `∫f`
/// drops below tol, or up to `m_max` steps.
///
/// An inadmissible `f` is reported as diverging: `T̂_i^m f(1) = f(1)` for
/// every `m`, so `|f(1) − ∫f|` is a floor for every sup error.
pub fn uniform_convergence_probe(
    i: u32,
    f: &dyn Observable,
    observable_id: &str,
    m_max: usize,
    tol: f64,
    eps: f64,
) -> Result<ConvergenceReport> {
    let spec = OperatorSpec::kantorovich(i, eps)?;
    let grid = spec.standard_grid(&GridSpec::default())?;
    let dynamics = GridDynamics::new(spec, grid)?;
    convergence_probe(&dynamics, f, observable_id, None, m_max, tol)
}

/// As [`uniform_convergence_probe`] for any prepared dynamics. The target
/// is `∫f` unless given.
pub fn convergence_probe(
    dynamics: &GridDynamics,
    f: &dyn Observable,
    observable_id: &str,
    target: Option<f64>,
    m_max: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    check_probe_args(m_max, tol)?;
    let spec = *dynamics.spec();
    let (admissible, f1, integral) = acu_rasa_verdict(f, spec.eps.min(tol) / 10.0)?;
    let target_constant = target.unwrap_or(integral);
    let kantorovich = matches!(spec.kind, OperatorKind::Kantorovich { .. });
    let floor = (kantorovich && !admissible).then(|| (f1 - integral).abs());
    probe(
        dynamics,
        f,
        observable_id,
        (target_constant, None),
        floor,
        m_max,
        tol,
    )
}

/// Iterates toward `f(0)(1 − x) + f(1)x`, the limit of the projection,
/// Bernstein and Meyer-König–Zeller iterates.
pub fn affine_limit_probe(
    dynamics: &GridDynamics,
    f: &dyn Observable,
    observable_id: &str,
    m_max: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    check_probe_args(m_max, tol)?;
    let (f0, f1) = (f.eval(0.0), f.eval(1.0));
    probe(
        dynamics,
        f,
        observable_id,
        (f0, Some(f1 - f0)),
        None,
        m_max,
        tol,
    )
}

fn check_probe_args(m_max: usize, tol: f64) -> Result<()> {
    if m_max == 0 || m_max > 10_000 {
        return Err(Error::domain("m_max must lie in 1..=10000"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tol must be positive"));
    }
    Ok(())
}

fn probe(
    dynamics: &GridDynamics,
    f: &dyn Observable,
    observable_id: &str,
    (c, slope): (f64, Option<f64>),
    floor: Option<f64>,
    m_max: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    let grid = dynamics.grid();
    let sup = |values: &[f64]| match slope {
        None => sup_to_constant(values, c),
        Some(s) => grid
            .iter()
            .zip(values)
            .fold(0.0f64, |m, (x, v)| m.max((v - c - s * x).abs())),
    };
    let mut st = dynamics.start(f)?;
    let mut m_values = Vec::new();
    let mut sup_errors = Vec::new();
    let mut verdict = Verdict::Inconclusive;
    loop {
        let e = sup(st.values());
        m_values.push(st.m);
        sup_errors.push(e);
        if floor.is_none() && e < tol {
            verdict = Verdict::Converges;
            break;
        }
        if st.m >= m_max {
            break;
        }
        dynamics.step(&mut st);
    }
    if floor.is_some() {
        verdict = Verdict::Diverges;
    }
    let positive: Vec<f64> = sup_errors.iter().copied().filter(|e| *e > 0.0).collect();
    let rate_estimate = if verdict == Verdict::Converges && positive.len() == sup_errors.len() {
        let tail = &positive[positive.len().saturating_sub(200)..];
        rate_estimate(tail).ok().flatten()
    } else {
        None
    };
    Ok(ConvergenceReport {
        operator: *dynamics.spec(),
        observable_id: observable_id.to_string(),
        m_values,
        sup_errors,
        rate_estimate,
        verdict,
        target_constant: c,
        target_slope: slope,
        certified_floor: floor,
    })
}

fn sup_to_constant(values: &[f64], c: f64) -> f64 {
    values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
}

/// Result of a dual probe: one certified TV distance to λ per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DualProbe {
    pub i: u32,
    pub x: f64,
    pub distances: Vec<Certified>,
    pub cells: Vec<usize>,
}

impl DualProbe {
    /// Whether the sequence is nonincreasing up to the certified slack.
    pub fn is_monotone(&self) -> bool {
        self.distances
            .windows(2)
            .all(|w| w[1].lower() <= w[0].upper() + 1e-12)
    }

    /// First step whose upper bound is below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.distances.iter().position(|d| d.upper() < level)
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("m,tv,lower_interval,upper_interval,cells\n");
        for (m, (d, n)) in self.distances.iter().zip(&self.cells).enumerate() {
            let _ = writeln!(
                s,
                "{m},{:e},{:e},{:e},{n}",
                d.value,
                d.lower().max(0.0),
                d.upper()
            );
        }
        s
    }
}

/// `‖T̂_i'^{m+1} δ_x − λ‖_TV` for `m = 0, …, m_max`.
///
/// `eps` bounds the mass each application may push past the represented
/// cells, so the slack after `m` steps is at most `(m+1)·eps` plus the
/// quadrature error. With `stop_below` the probe ends at the first step
/// whose upper bound is below that level; TV distances to an invariant
/// measure never increase under a Markov dual, so later steps stay below.
pub fn dual_convergence_probe(
    i: u32,
    x: f64,
    m_max: usize,
    eps: f64,
    stop_below: Option<f64>,
) -> Result<DualProbe> {
    if m_max == 0 || m_max > 1000 {
        return Err(Error::domain("m_max must lie in 1..=1000"));
    }
    let mut mu = if x == 1.0 {
        PartitionMeasure::dirac_one(i)?
    } else {
        measures::delta_image(i, x, eps)?
    };
    let mut distances = Vec::with_capacity(m_max + 1);
    let mut cells = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let d = measures::tv_to_lebesgue(&mu);
        distances.push(d);
        cells.push(mu.len());
        if stop_below.is_some_and(|s| d.upper() < s) || m == m_max {
            break;
        }
        mu = measures::dual_step(i, &mu, eps, 0, true)?;
    }
    Ok(DualProbe {
        i,
        x,
        distances,
        cells,
    })
}

/// Per-point result of [`gap02_survey`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub x: f64,
    pub gap: f64,
    pub gap_slack: f64,
    pub wedge: f64,
    pub wedge_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSurvey {
    pub i: u32,
    pub points: Vec<GapPoint>,
    /// Largest certified upper bound on the gap.
    pub max_gap: f64,
    /// Smallest certified lower bound on the wedge mass.
    pub min_wedge: f64,
}

impl GapSurvey {
    pub fn passes(&self) -> bool {
        self.max_gap < 2.0 - 1e-3 && self.min_wedge > 1e-3
    }
}

/// `max_x ‖T̂'²δ_x − T̂'δ_x‖_TV` and `min_x ‖T̂'²δ_x ∧ T̂'δ_x‖_TV`, both
/// taken at the pessimistic end of their certified intervals.
pub fn gap02_survey(i: u32, x_list: &[f64], eps: f64) -> Result<GapSurvey> {
    if x_list.is_empty() {
        return Err(Error::domain("x list is empty"));
    }
    let mut points = Vec::with_capacity(x_list.len());
    for &x in x_list {
        let (g, w) = measures::gap_and_wedge(i, x, eps)?;
        points.push(GapPoint {
            x,
            gap: g.value,
            gap_slack: g.slack,
            wedge: w.value,
            wedge_slack: w.slack,
        });
    }
    let max_gap = points
        .iter()
        .map(|p| (p.gap + p.gap_slack).min(2.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_wedge = points
        .iter()
        .map(|p| (p.wedge - p.wedge_slack).max(0.0))
        .fold(f64::INFINITY, f64::min);
    Ok(GapSurvey {
        i,
        points,
        max_gap,
        min_wedge,
    })
}

/// `(C_x, min_l γ_l(x)/β_l(x))` over the window `r j_x ≤ l ≤ j_x`.
pub fn ratio_bound_check(i: u32, x: f64, r: f64) -> Result<(f64, f64)> {
    let (lo, hi) = window(i, x, r)?;
    let c_x = seqcore::window_mass(i, x, r)?;
    let len = hi as usize + 1;
    let gamma = measures::gamma_weights(i, x, len, 1e-12)?;
    let beta = beta_weights(i, x, len)?;
    let min_ratio = (lo as usize..len)
        .map(|l| gamma[l] / beta[l])
        .fold(f64::INFINITY, f64::min);
    Ok((c_x, min_ratio))
}

/// `(max row error, max column error)` of the kernel
/// `k_i(x, y) = Σ_l α_l(x) 1_{I_l}(y)`.
///
/// Rows are checked at `quad_points` values of x; columns use
/// `(i+1) C(i+l+1, l) B(i+1, l+1) = 1` for `l < J`, each factor built as a
/// product of ratios.
pub fn kernel_stochasticity_check(i: u32, len: usize, quad_points: usize) -> Result<(f64, f64)> {
    seqcore::check_i(i)?;
    if len == 0 || quad_points == 0 {
        return Err(Error::domain("J and quad_points must be positive"));
    }
    let mut row_err = 0.0f64;
    for q in 0..quad_points {
        let x = (q as f64 + 0.5) / quad_points as f64;
        let nu = measures::delta_image(i, x, 1e-14)?;
        row_err = row_err.max((nu.mass() - 1.0).abs());
    }
    let mut col_err = 0.0f64;
    for l in 0..len as u64 {
        // (i+1) C(i+l+1, l) = (i+l+1)! / (i! l!); B(i+1, l+1) = i! l! / (i+l+1)!
        let mut v = 1.0;
        for k in 1..=(i as u64 + 1) {
            v *= (l + k) as f64 / k as f64;
        }
        v *= i as f64 + 1.0;
        let mut b = 1.0;
        for k in 1..=i as u64 {
            b *= k as f64 / (l + k) as f64;
        }
        b /= (l + i as u64 + 1) as f64;
        col_err = col_err.max((v * b - 1.0).abs());
    }
    Ok((row_err, col_err))
}

/// Geometric rate `q` of a sequence `≈ C q^m`, from the least-squares fit of
/// `ln e_m` against `m`. `None` when the fit is poor or `q > 1`.
pub fn rate_estimate(sup_errors: &[f64]) -> Result<Option<f64>> {
    if sup_errors.len() < 5 {
        return Err(Error::domain("need at least 5 errors"));
    }
    if sup_errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::domain("errors must be positive"));
    }
    let n = sup_errors.len() as f64;
    let ys: Vec<f64> = sup_errors.iter().map(|e| e.ln()).collect();
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let rms = (ys
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let r = y - (my + slope * (k as f64 - mx));
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let q = slope.exp();
    if rms > 0.05 || q > 1.0 {
        return Ok(None);
    }
    Ok(Some(q))
}

/// Moduli of the eigenvalues of the Bernstein node matrix, descending.
pub fn bernstein_spectrum(k: u32) -> Result<Vec<f64>> {
    let a = bernstein_node_matrix(k)?;
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(ev)
}
