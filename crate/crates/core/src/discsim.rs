//! Monte Carlo simulation of a diffusion on the closed unit disc.
//!
//! From an interior point `u` the chain jumps to a uniform point of the
//! ball of radius `1 − |u|` centred at `(2 − 1/|u|)u` when `|u| ≥ 1/2`,
//! and at 0 when `|u| < 1/2`. Boundary points are absorbing.
//!
//! Randomness comes from ChaCha8 seeded with the run seed; every
//! trajectory reads its own stream, selected by its id.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// States with `|u|` this close to 1 are treated as boundary points.
pub const BOUNDARY_TOL: f64 = 1e-15;

/// Longest trajectory accepted.
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscState {
    pub re: f64,
    pub im: f64,
}

impl DiscState {
    pub fn new(re: f64, im: f64) -> crate::Result<Self> {
        let s = DiscState { re, im };
        if !(s.norm_sqr() <= 1.0 + 1e-12) {
            return Err(crate::Error::domain(format!(
                "({re}, {im}) lies outside the closed unit disc"
            )));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn is_boundary(&self) -> bool {
        self.abs() >= 1.0 - BOUNDARY_TOL
    }
}

/// The ball `(centre, radius)` that the kernel at `u` spreads over.
pub fn kernel_ball(u: DiscState) -> (DiscState, f64) {
    let a = u.abs();
    let r = 1.0 - a;
    if a >= 0.5 {
        let s = 2.0 - 1.0 / a;
        (
            DiscState {
                re: s * u.re,
                im: s * u.im,
            },
            r,
        )
    } else {
        (DiscState { re: 0.0, im: 0.0 }, r)
    }
}

/// One step of the chain.
pub fn disc_step<R: Rng + ?Sized>(u: DiscState, rng: &mut R) -> DiscState {
    if u.is_boundary() {
        return u;
    }
    let (c, r) = kernel_ball(u);
    let rho = r * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    let (s, co) = theta.sin_cos();
    DiscState {
        re: c.re + rho * co,
        im: c.im + rho * s,
    }
}

/// The generator used for trajectory `stream` of a run with this seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_len(n: usize) -> crate::Result<()> {
    if n == 0 || n > MAX_STEPS {
        return Err(crate::Error::domain(format!(
            "n must lie in 1..={MAX_STEPS}"
        )));
    }
    Ok(())
}

/// `n` steps from `z0` on stream 0; the result has `n + 1` states.
pub fn disc_trajectory(z0: DiscState, n: usize, seed: u64) -> crate::Result<Vec<DiscState>> {
    disc_trajectory_stream(z0, n, seed, 0)
}

pub fn disc_trajectory_stream(
    z0: DiscState,
    n: usize,
    seed: u64,
    stream: u64,
) -> crate::Result<Vec<DiscState>> {
    check_len(n)?;
    let mut rng = stream_rng(seed, stream);
    let mut out = Vec::with_capacity(n + 1);
    let mut z = z0;
    out.push(z);
    for _ in 0..n {
        z = disc_step(z, &mut rng);
        out.push(z);
    }
    Ok(out)
}

/// Running averages `(1/(m+1)) Σ_{k≤m} f(ξ_k)` along a trajectory.
pub fn disc_cesaro(
    f: impl Fn(DiscState) -> f64,
    z0: DiscState,
    n: usize,
    seed: u64,
) -> crate::Result<Vec<f64>> {
    disc_cesaro_stream(f, z0, n, seed, 0)
}

pub fn disc_cesaro_stream(
    f: impl Fn(DiscState) -> f64,
    z0: DiscState,
    n: usize,
    seed: u64,
    stream: u64,
) -> crate::Result<Vec<f64>> {
    check_len(n)?;
    let mut rng = stream_rng(seed, stream);
    let mut out = Vec::with_capacity(n + 1);
    let mut z = z0;
    let mut sum = 0.0;
    for m in 0..=n {
        if m > 0 {
            z = disc_step(z, &mut rng);
        }
        sum += f(z);
        out.push(sum / (m + 1) as f64);
    }
    Ok(out)
}

/// Mean of `f` along a trajectory with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

/// Streams `n` steps without storing them and splits the samples into
/// `batches` equal batches for the standard error.
pub fn ergodic_average(
    f: impl Fn(DiscState) -> f64,
    z0: DiscState,
    n: usize,
    seed: u64,
    stream: u64,
    batches: usize,
) -> crate::Result<ErgodicEstimate> {
    check_len(n)?;
    if batches < 2 || batches > n + 1 {
        return Err(crate::Error::domain("need between 2 and n+1 batches"));
    }
    let mut rng = stream_rng(seed, stream);
    let per = (n + 1) / batches;
    let mut means = Vec::with_capacity(batches);
    let mut z = z0;
    let mut acc = 0.0;
    let mut count = 0;
    let mut total = 0.0;
    for m in 0..=n {
        if m > 0 {
            z = disc_step(z, &mut rng);
        }
        let v = f(z);
        total += v;
        if means.len() < batches {
            acc += v;
            count += 1;
            if count == per {
                means.push(acc / per as f64);
                acc = 0.0;
                count = 0;
            }
        }
    }
    let b = means.len() as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(ErgodicEstimate {
        mean: total / (n + 1) as f64,
        std_error: (var / b).sqrt(),
        batches,
    })
}

/// CSV with columns `step,re,im`.
pub fn trajectory_csv(header: &str, states: &[DiscState]) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("step,re,im\n");
    for (k, z) in states.iter().enumerate() {
        let _ = writeln!(s, "{k},{:e},{:e}", z.re, z.im);
    }
    s
}

/// CSV with columns `step,avg`.
pub fn averages_csv(header: &str, avgs: &[f64]) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("step,avg\n");
    for (k, a) in avgs.iter().enumerate() {
        let _ = writeln!(s, "{k},{a:e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_fixed() {
        let u = DiscState::new(0.6, 0.8).unwrap();
        let t = disc_trajectory(u, 100, 7).unwrap();
        assert!(t.iter().all(|z| *z == u));
    }

    #[test]
    fn kernel_balls() {
        let (c, r) = kernel_ball(DiscState { re: 0.0, im: 0.0 });
        assert_eq!((c.re, c.im, r), (0.0, 0.0, 1.0));
        let (c, r) = kernel_ball(DiscState { re: 0.75, im: 0.0 });
        assert!((c.re - 0.5).abs() < 1e-15 && (r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reproducible_and_distinct_streams() {
        let z0 = DiscState::new(0.1, -0.2).unwrap();
        let a = disc_trajectory(z0, 1000, 42).unwrap();
        let b = disc_trajectory(z0, 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = disc_trajectory_stream(z0, 1000, 42, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_averages() {
        let avg = disc_cesaro(|_| 1.0, DiscState::new(0.3, 0.3).unwrap(), 500, 1).unwrap();
        assert!(avg.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn rejects_outside_points() {
        assert!(DiscState::new(1.0, 0.1).is_err());
    }
}
