//! Gauss–Legendre rules and a small adaptive integrator.

use crate::{Error, Result};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            let theta = std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5);
            let mut z = theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[k] = -z;
            nodes[n - 1 - k] = z;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// `∫_a^b f` with this rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Adaptive bisection with a 10-point rule compared against its two halves.
/// Fails with an accuracy error if `tol` is not met within the depth limit.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let rule = GaussLegendre::new(10);
    let whole = rule.integrate(a, b, f);
    let mut err_total = 0.0;
    let v = adapt(&rule, f, a, b, whole, tol, 0, &mut err_total);
    if err_total > tol {
        return Err(Error::accuracy(
            "adaptive quadrature did not converge",
            err_total,
            tol,
        ));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    rule: &GaussLegendre,
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err_total: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let err = (left + right - whole).abs();
    if err <= tol.max(1e-15 * (left + right).abs()) || depth >= 40 {
        if depth >= 40 {
            *err_total += err;
        }
        return left + right;
    }
    adapt(rule, f, a, m, left, tol / 2.0, depth + 1, err_total)
        + adapt(rule, f, m, b, right, tol / 2.0, depth + 1, err_total)
}
