//! Evaluation grids on `[0,1]` and sampled functions.

use crate::observable::Observable;
use crate::seqcore::cell_left;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// How the standard evaluation grid is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of uniform steps; the uniform part is `{k/steps}`.
    pub uniform_steps: usize,
    /// Refinement points `1 − 2^{−p}` for `p ≤ depth`.
    pub geometric_depth: u32,
    /// Partition endpoints `j/(i+j)` included for `j ≤ partition_cells`.
    pub partition_cells: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            uniform_steps: 256,
            geometric_depth: 20,
            partition_cells: 64,
        }
    }
}

impl GridSpec {
    /// Grid points, optionally with the endpoints of the `i`-partition and
    /// with extra nodes.
    pub fn points(&self, i: Option<u32>, extra: &[f64]) -> Result<Vec<f64>> {
        if self.uniform_steps == 0 {
            return Err(Error::domain("grid needs at least one uniform step"));
        }
        let n = self.uniform_steps as f64;
        let mut pts: Vec<f64> = (0..=self.uniform_steps).map(|k| k as f64 / n).collect();
        pts.extend((1..=self.geometric_depth).map(|p| 1.0 - 0.5f64.powi(p as i32)));
        if let Some(i) = i {
            pts.extend((1..=self.partition_cells).map(|j| cell_left(i, j)));
        }
        pts.extend(extra.iter().copied().filter(|v| (0.0..=1.0).contains(v)));
        pts.sort_by(|a, b| a.partial_cmp(b).expect("grid points are finite"));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        // make sure the endpoints survive deduplication exactly
        pts[0] = 0.0;
        *pts.last_mut().expect("nonempty") = 1.0;
        Ok(pts)
    }
}

/// Values of an observable on a strictly increasing grid that ends at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::domain("grid and values differ in length"));
        }
        if grid.is_empty() || *grid.last().unwrap() != 1.0 {
            return Err(Error::domain("grid must end at exactly 1"));
        }
        if grid[0] < 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "grid must be strictly increasing inside [0,1]",
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn sample(grid: &[f64], f: &dyn Observable) -> Result<Self> {
        GridFunction::new(grid.to_vec(), grid.iter().map(|&t| f.eval(t)).collect())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `max |values − c|`.
    pub fn sup_distance_to_constant(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    /// `max |values − other|` on a shared grid.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::domain("grid functions live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl Observable for GridFunction {
    /// Piecewise-linear interpolation, constant beyond the first node.
    fn eval(&self, t: f64) -> f64 {
        interpolate(&self.grid, &self.values, t)
    }
}

pub(crate) fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= grid[0] {
        return values[0];
    }
    if t >= 1.0 {
        return values[values.len() - 1];
    }
    let k = grid.partition_point(|&g| g <= t);
    let (x0, x1) = (grid[k - 1], grid[k]);
    let w = (t - x0) / (x1 - x0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_shape() {
        let g = GridSpec::default().points(Some(1), &[]).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&(1.0 - 0.5f64.powi(20))));
        assert!(g.contains(&(2.0 / 3.0)));
    }

    #[test]
    fn interpolation_reproduces_linear() {
        let g = GridSpec::default().points(Some(2), &[]).unwrap();
        let f = GridFunction::sample(&g, &|t: f64| 2.0 * t - 1.0).unwrap();
        for t in [0.0, 0.1234, 0.5, 0.99999, 1.0] {
            assert!((f.eval(t) - (2.0 * t - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction::new(vec![0.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(GridFunction::new(vec![0.5, 0.5, 1.0], vec![1.0; 3]).is_err());
        assert!(GridFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
