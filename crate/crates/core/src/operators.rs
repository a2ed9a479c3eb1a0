//! The four concrete Markov operators, pointwise and on a grid.
//!
//! ```text
//! projection    T f(x)   = f(0)(1−x) + f(1)x
//! Bernstein     B_k f(x) = Σ_{j≤k} C(k,j) x^j (1−x)^{k−j} f(j/k)
//! MKZ           T_i f(x) = Σ_j (1−x)^{i+1} C(i+j,j) x^j f(j/(i+j))
//! Kantorovich   T̂_i f(x) = Σ_j α_j(x) ∫_{I_j} f
//! ```

use crate::grid::{GridFunction, GridSpec};
use crate::observable::Observable;
use crate::quadrature::GaussLegendre;
use crate::seqcore::{self, cell_left, cell_len, log_binomial, truncated_pmf};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Which operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorKind {
    Projection,
    Bernstein { k: u32 },
    Mkz { i: u32 },
    Kantorovich { i: u32 },
}

/// An operator together with its series and quadrature tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    pub eps: f64,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, eps: f64) -> Result<Self> {
        match kind {
            OperatorKind::Bernstein { k: 0 } => return Err(Error::domain("k must be ≥ 1")),
            OperatorKind::Mkz { i: 0 } | OperatorKind::Kantorovich { i: 0 } => {
                return Err(Error::domain("i must be ≥ 1"))
            }
            _ => {}
        }
        check_eps(eps)?;
        Ok(OperatorSpec { kind, eps })
    }

    pub fn kantorovich(i: u32, eps: f64) -> Result<Self> {
        OperatorSpec::new(OperatorKind::Kantorovich { i }, eps)
    }

    /// The standard grid for this operator: uniform and near-1 points, plus
    /// partition endpoints or Bernstein nodes.
    pub fn standard_grid(&self, spec: &GridSpec) -> Result<Vec<f64>> {
        match self.kind {
            OperatorKind::Mkz { i } | OperatorKind::Kantorovich { i } => spec.points(Some(i), &[]),
            OperatorKind::Bernstein { k } => {
                let nodes: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
                spec.points(None, &nodes)
            }
            OperatorKind::Projection => spec.points(None, &[]),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::domain(format!("eps = {eps} must lie in (0, 1e-2]")));
    }
    Ok(())
}

fn check_x_closed(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} must lie in [0, 1]")));
    }
    Ok(())
}

/// `f(0)(1−x) + f(1)x`.
pub fn apply_projection(f: &dyn Observable, x: f64) -> Result<f64> {
    check_x_closed(x)?;
    Ok(f.eval(0.0) * (1.0 - x) + f.eval(1.0) * x)
}

pub(crate) fn binomial_f64(n: u64, k: u64) -> f64 {
    if n <= 60 {
        let k = k.min(n - k);
        let mut c: u64 = 1;
        for m in 1..=k {
            c = c * (n - k + m) / m;
        }
        c as f64
    } else {
        log_binomial(n, k).expect("k ≤ n").exp()
    }
}

fn bernstein_basis(k: u32, x: f64) -> Vec<f64> {
    (0..=k)
        .map(|j| {
            binomial_f64(k as u64, j as u64) * x.powi(j as i32) * (1.0 - x).powi((k - j) as i32)
        })
        .collect()
}

/// Row `m` holds the binomial pmf at the node `m/k`.
pub fn bernstein_node_matrix(k: u32) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::domain("k must be ≥ 1"));
    }
    let n = k as usize + 1;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let row = bernstein_basis(k, r as f64 / k as f64);
        for (c, v) in row.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// `B_k f(x)`.
pub fn apply_bernstein(k: u32, f: &dyn Observable, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("k must be ≥ 1"));
    }
    check_x_closed(x)?;
    Ok(bernstein_basis(k, x)
        .iter()
        .enumerate()
        .map(|(j, w)| w * f.eval(j as f64 / k as f64))
        .sum())
}

/// `T_i f(x)`, with the series truncated once its weight tail is ≤ eps.
pub fn apply_mkz(i: u32, f: &dyn Observable, x: f64, eps: f64) -> Result<f64> {
    seqcore::check_i(i)?;
    check_x_closed(x)?;
    check_eps(eps)?;
    if x == 1.0 {
        return Ok(f.eval(1.0));
    }
    let (w, _) = truncated_pmf(i + 1, x, eps)?;
    Ok(w.iter()
        .enumerate()
        .map(|(j, w)| w * f.eval(cell_left(i, j as u64)))
        .sum())
}

/// `∫_{I_j} f` for `j < J` by `quad_order`-point Gauss–Legendre.
pub fn subinterval_integrals(
    f: &dyn Observable,
    i: u32,
    len: usize,
    quad_order: usize,
) -> Result<Vec<f64>> {
    seqcore::check_i(i)?;
    if quad_order < 2 {
        return Err(Error::domain("quad_order must be ≥ 2"));
    }
    let rule = GaussLegendre::new(quad_order);
    Ok((0..len as u64)
        .map(|j| rule.integrate(cell_left(i, j), cell_left(i, j + 1), |t| f.eval(t)))
        .collect())
}

/// `T̂_i f(x)`, with 4-point Gauss quadrature on each cell.
pub fn apply_kantorovich(i: u32, f: &dyn Observable, x: f64, eps: f64) -> Result<f64> {
    seqcore::check_i(i)?;
    check_x_closed(x)?;
    check_eps(eps)?;
    if x == 1.0 {
        return Ok(f.eval(1.0));
    }
    let (betas, _) = truncated_pmf(i, x, eps)?;
    let rule = GaussLegendre::new(4);
    Ok(betas
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let j = j as u64;
            let integral = rule.integrate(cell_left(i, j), cell_left(i, j + 1), |t| f.eval(t));
            b * integral / cell_len(i, j)
        })
        .sum())
}

// Tail mass allowed per matrix row when discretizing MKZ/Kantorovich.
fn row_tail(eps: f64) -> f64 {
    (eps * 1e-6).min(1e-12)
}

/// A Markov operator restricted to piecewise-linear functions on a grid.
///
/// For MKZ and Kantorovich each grid point `x` gets the row of weights that
/// `T` puts on the hat functions of the grid, so one iteration is a
/// matrix–vector product. The truncated series tail goes to the hat at 1.
/// Bernstein iterates are carried exactly through the `k+1` node values.
#[derive(Debug, Clone)]
pub struct GridDynamics {
    spec: OperatorSpec,
    grid: Vec<f64>,
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Dense {
        rows: Vec<f64>,
    },
    Bernstein {
        nodes: DMatrix<f64>,
        eval: DMatrix<f64>,
    },
}

/// The iterate `T^m f` in progress.
#[derive(Debug, Clone)]
pub struct IterState {
    pub m: usize,
    values: Vec<f64>,
    nodes: Vec<f64>,
}

impl IterState {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl GridDynamics {
    pub fn new(spec: OperatorSpec, grid: Vec<f64>) -> Result<Self> {
        GridFunction::new(grid.clone(), vec![0.0; grid.len()])?;
        if grid[0] != 0.0 {
            return Err(Error::domain("grid must start at 0"));
        }
        let g = grid.len();
        let inner = match spec.kind {
            OperatorKind::Projection => {
                let mut rows = vec![0.0; g * g];
                for (r, &x) in grid.iter().enumerate() {
                    rows[r * g] += 1.0 - x;
                    rows[r * g + g - 1] += x;
                }
                Inner::Dense { rows }
            }
            OperatorKind::Bernstein { k } => {
                let nodes = bernstein_node_matrix(k)?;
                let mut eval = DMatrix::zeros(g, k as usize + 1);
                for (r, &x) in grid.iter().enumerate() {
                    for (c, v) in bernstein_basis(k, x).into_iter().enumerate() {
                        eval[(r, c)] = v;
                    }
                }
                Inner::Bernstein { nodes, eval }
            }
            OperatorKind::Mkz { i } => Inner::Dense {
                rows: dense_rows(&grid, |x, row| {
                    mkz_row(i, x, &grid, row_tail(spec.eps), row)
                })?,
            },
            OperatorKind::Kantorovich { i } => Inner::Dense {
                rows: dense_rows(&grid, |x, row| {
                    kantorovich_row(i, x, &grid, row_tail(spec.eps), row)
                })?,
            },
        };
        Ok(GridDynamics { spec, grid, inner })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Starts the iteration at `f`, after checking that piecewise-linear
    /// interpolation on the grid resolves `f` to within eps where needed.
    pub fn start(&self, f: &dyn Observable) -> Result<IterState> {
        let values: Vec<f64> = self.grid.iter().map(|&t| f.eval(t)).collect();
        if matches!(self.inner, Inner::Dense { .. })
            && !matches!(self.spec.kind, OperatorKind::Projection)
        {
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = self
                .grid
                .windows(2)
                .zip(values.windows(2))
                .fold(0.0f64, |m, (g, v)| {
                    let mid = f.eval(0.5 * (g[0] + g[1]));
                    m.max((mid - 0.5 * (v[0] + v[1])).abs())
                });
            if err > self.spec.eps * scale {
                return Err(Error::accuracy(
                    "grid too coarse to resolve the observable",
                    err / scale,
                    self.spec.eps,
                ));
            }
        }
        let nodes = match &self.inner {
            Inner::Bernstein { nodes, .. } => {
                let k = nodes.nrows() - 1;
                (0..=k).map(|j| f.eval(j as f64 / k as f64)).collect()
            }
            Inner::Dense { .. } => Vec::new(),
        };
        Ok(IterState {
            m: 0,
            values,
            nodes,
        })
    }

    /// Advances `T^m f` to `T^{m+1} f`.
    pub fn step(&self, st: &mut IterState) {
        let g = self.grid.len();
        match &self.inner {
            Inner::Dense { rows } => {
                let last = st.values[g - 1];
                let next: Vec<f64> = (0..g)
                    .map(|r| {
                        let row = &rows[r * g..(r + 1) * g];
                        row.iter().zip(&st.values).map(|(w, v)| w * v).sum()
                    })
                    .collect();
                st.values = next;
                if !matches!(self.spec.kind, OperatorKind::Projection) {
                    // the point 1 is fixed; keep it bit-exact
                    st.values[g - 1] = last;
                }
            }
            Inner::Bernstein { nodes, eval } => {
                let v = nalgebra::DVector::from_vec(std::mem::take(&mut st.nodes));
                st.values = (eval * &v).iter().copied().collect();
                st.nodes = (nodes * &v).iter().copied().collect();
            }
        }
        st.m += 1;
    }

    pub fn to_grid_function(&self, st: &IterState) -> GridFunction {
        GridFunction::new(self.grid.clone(), st.values.clone()).expect("grid validated")
    }
}

fn dense_rows(
    grid: &[f64],
    mut fill: impl FnMut(f64, &mut [f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    let g = grid.len();
    let mut rows = vec![0.0; g * g];
    for (r, &x) in grid.iter().enumerate() {
        let row = &mut rows[r * g..(r + 1) * g];
        if x == 1.0 {
            row[g - 1] = 1.0;
        } else {
            fill(x, row)?;
        }
    }
    Ok(rows)
}

// Adds weight `w` of the point evaluation at `t` to the hat coefficients.
fn add_point(grid: &[f64], t: f64, w: f64, row: &mut [f64], hint: &mut usize) {
    let g = grid.len();
    if t >= 1.0 {
        row[g - 1] += w;
        return;
    }
    while *hint + 1 < g && grid[*hint + 1] <= t {
        *hint += 1;
    }
    let k = *hint;
    let s = (t - grid[k]) / (grid[k + 1] - grid[k]);
    row[k] += w * (1.0 - s);
    row[k + 1] += w * s;
}

fn mkz_row(i: u32, x: f64, grid: &[f64], tail: f64, row: &mut [f64]) -> Result<()> {
    let (w, _) = truncated_pmf(i + 1, x, tail)?;
    let mut hint = 0;
    let mut total = 0.0;
    for (j, &wj) in w.iter().enumerate() {
        add_point(grid, cell_left(i, j as u64), wj, row, &mut hint);
        total += wj;
    }
    let g = grid.len();
    row[g - 1] += (1.0 - total).max(0.0);
    Ok(())
}

// Weight `w` times the average over [a, b] of the piecewise-linear
// interpolant, split onto the hat coefficients.
fn add_cell_average(grid: &[f64], a: f64, b: f64, w: f64, row: &mut [f64], hint: &mut usize) {
    let g = grid.len();
    while *hint + 1 < g && grid[*hint + 1] <= a {
        *hint += 1;
    }
    let k = *hint;
    if k + 1 >= g {
        row[g - 1] += w;
        return;
    }
    if b <= grid[k + 1] {
        // the average of a linear function is its midpoint value
        let s = (0.5 * (a + b) - grid[k]) / (grid[k + 1] - grid[k]);
        row[k] += w * (1.0 - s);
        row[k + 1] += w * s;
        return;
    }
    let scale = w / (b - a);
    let mut q = k;
    let mut lo = a;
    while lo < b && q + 1 < g {
        let hi = b.min(grid[q + 1]);
        let h = grid[q + 1] - grid[q];
        let len = hi - lo;
        let s = (0.5 * (lo + hi) - grid[q]) / h;
        row[q] += scale * len * (1.0 - s);
        row[q + 1] += scale * len * s;
        lo = hi;
        q += 1;
    }
}

fn kantorovich_row(i: u32, x: f64, grid: &[f64], tail: f64, row: &mut [f64]) -> Result<()> {
    let (betas, _) = truncated_pmf(i, x, tail)?;
    let mut hint = 0;
    let mut total = 0.0;
    for (j, &b) in betas.iter().enumerate() {
        let j = j as u64;
        add_cell_average(
            grid,
            cell_left(i, j),
            cell_left(i, j + 1),
            b,
            row,
            &mut hint,
        );
        total += b;
    }
    let g = grid.len();
    row[g - 1] += (1.0 - total).max(0.0);
    Ok(())
}

/// `T^m f` on the grid.
pub fn iterate_on_grid(
    spec: &OperatorSpec,
    f: &dyn Observable,
    m: usize,
    grid: &[f64],
) -> Result<GridFunction> {
    if m == 0 {
        return Err(Error::domain("m must be ≥ 1"));
    }
    let dynamics = GridDynamics::new(*spec, grid.to_vec())?;
    let mut st = dynamics.start(f)?;
    for _ in 0..m {
        dynamics.step(&mut st);
    }
    Ok(dynamics.to_grid_function(&st))
}

/// `(f + T f + … + T^{m−1} f)/m` on the grid.
pub fn cesaro_on_grid(
    spec: &OperatorSpec,
    f: &dyn Observable,
    m: usize,
    grid: &[f64],
) -> Result<GridFunction> {
    if m == 0 {
        return Err(Error::domain("m must be ≥ 1"));
    }
    let dynamics = GridDynamics::new(*spec, grid.to_vec())?;
    let mut st = dynamics.start(f)?;
    let mut acc = st.values().to_vec();
    for _ in 1..m {
        dynamics.step(&mut st);
        for (a, v) in acc.iter_mut().zip(st.values()) {
            *a += v;
        }
    }
    let last = acc.len() - 1;
    let fixed = st.values()[last];
    for a in acc.iter_mut() {
        *a /= m as f64;
    }
    if !matches!(
        spec.kind,
        OperatorKind::Projection | OperatorKind::Bernstein { .. }
    ) {
        acc[last] = fixed;
    }
    GridFunction::new(grid.to_vec(), acc)
}
