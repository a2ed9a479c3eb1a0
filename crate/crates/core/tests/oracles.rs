//! Values checked against independent computations: exact integers,
//! statrs distributions and special functions, direct summation.

use genkant::analysis::bernstein_spectrum;
use genkant::measures::{dual_apply, gap02, lebesgue_measure, PartitionMeasure};
use genkant::observable::Polynomial;
use genkant::operators::apply_mkz;
use genkant::seqcore::{
    argmax_indices, beta_weights, cell_left_complement, cell_len, log_binomial, truncation_index,
    KantorovichWeights,
};
use num_bigint::BigUint;
use statrs::distribution::{Discrete, NegativeBinomial};
use statrs::function::beta::beta_reg;

fn big_binomial(n: u64, k: u64) -> BigUint {
    let mut v = BigUint::from(1u32);
    for m in 1..=k {
        v = v * BigUint::from(n - k + m) / BigUint::from(m);
    }
    v
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |v, m| v * BigUint::from(m))
}

fn big_ln(v: &BigUint) -> f64 {
    // ln of a big integer through its leading 64 bits
    let bits = v.bits();
    if bits <= 64 {
        return (v.iter_u64_digits().next().unwrap_or(0) as f64).ln();
    }
    let shift = bits - 64;
    let top = (v >> shift).iter_u64_digits().next().unwrap() as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[test]
fn log_binomial_matches_big_integers() {
    for n in [0u64, 1, 4, 10, 60, 99, 100, 101, 150, 400, 1000, 5000] {
        for k in [
            0,
            1,
            2,
            3,
            7,
            29,
            30,
            31,
            60,
            n / 3,
            n / 2,
            n.saturating_sub(1),
            n,
        ] {
            if k > n {
                continue;
            }
            let want = big_ln(&big_binomial(n, k));
            let got = log_binomial(n, k).unwrap();
            let tol = 1e-12 * want.abs().max(1.0);
            assert!((got - want).abs() <= tol, "C({n},{k}): {got} vs {want}");
        }
    }
    // exp matches C(60, 30) to 12 digits
    let c = big_binomial(60, 30).to_string().parse::<f64>().unwrap();
    let e = log_binomial(60, 30).unwrap().exp();
    assert!(((e - c) / c).abs() < 1e-12);
}

#[test]
fn beta_weights_match_exact_dyadic_values() {
    // at x = 1/2, β_j = C(i+j−1, j) / 2^{i+j} exactly
    for i in 1..=6u32 {
        let b = beta_weights(i, 0.5, 400).unwrap();
        for (j, v) in b.iter().enumerate() {
            let j = j as u64;
            let num = big_binomial(i as u64 + j - 1, j);
            let want = big_ln(&num) - (i as u64 + j) as f64 * std::f64::consts::LN_2;
            if want < -700.0 {
                break;
            }
            assert!(
                (v.ln() - want).abs() < 1e-11,
                "i={i} j={j} got {v} want {}",
                want.exp()
            );
        }
    }
}

#[test]
fn beta_weights_match_negative_binomial_pmf() {
    for i in 1..=5u32 {
        for x in [0.1, 0.37, 0.8, 0.95, 0.999] {
            let nb = NegativeBinomial::new(i as f64, 1.0 - x).unwrap();
            let b = beta_weights(i, x, 3000).unwrap();
            for (j, v) in b.iter().enumerate().step_by(7) {
                let want = nb.pmf(j as u64);
                if want < 1e-280 {
                    continue;
                }
                assert!(
                    ((v - want) / want).abs() < 1e-9,
                    "i={i} x={x} j={j} {v} {want}"
                );
            }
        }
    }
}

#[test]
fn truncation_tail_by_brute_force() {
    let j = truncation_index(2, 0.9, 1e-12).unwrap();
    let b = beta_weights(2, 0.9, 100_000).unwrap();
    let tail: f64 = b[j..].iter().rev().sum();
    assert!(tail <= 1e-12, "tail {tail}");
    let before: f64 = b[j - 1..].iter().rev().sum();
    assert!(before > 1e-12 * 0.5);
    let w = KantorovichWeights::new(2, 0.9, 1e-12).unwrap();
    assert!(w.tail_bound >= tail && w.tail_bound <= 1e-12);
}

#[test]
fn peaks_by_brute_force() {
    for (i, x, want) in [(2u32, 0.9, (27u64, 9u64)), (1, 0.9, (18, 0))] {
        assert_eq!(argmax_indices(i, x).unwrap(), want);
        let b = beta_weights(i, x, 10_000).unwrap();
        let a: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(j, v)| v / cell_len(i, j as u64))
            .collect();
        let amax = a.iter().copied().fold(0.0, f64::max);
        let bmax = b.iter().copied().fold(0.0, f64::max);
        assert!((a[want.0 as usize] - amax).abs() <= 1e-12 * amax);
        assert!((b[want.1 as usize] - bmax).abs() <= 1e-12 * bmax);
    }
}

#[test]
fn mkz_fixes_identity_by_direct_summation() {
    // T_1 e₁(1/2) = Σ_j C(j+1, j) 2^{−j−2} · j/(1+j)
    let x: f64 = 0.5;
    let direct: f64 = (0..100_000u64)
        .map(|j| (j + 1) as f64 * x.powi(j as i32) * (1.0 - x).powi(2) * j as f64 / (1 + j) as f64)
        .take_while(|v| v.is_finite())
        .sum();
    let got = apply_mkz(1, &Polynomial::monomial(1), x, 1e-12).unwrap();
    assert!((got - direct).abs() < 1e-10 && (got - 0.5).abs() < 1e-10);
}

#[test]
fn bernstein_spectrum_is_known_in_closed_form() {
    // B_k has eigenvalues k!/((k−m)! k^m), m = 0..k
    for k in 1..=8u32 {
        let mut want: Vec<f64> = (0..=k)
            .map(|m| (0..m).map(|s| (k - s) as f64 / k as f64).product())
            .collect();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let got = bernstein_spectrum(k).unwrap();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "k={k} {got:?} {want:?}");
        }
    }
}

#[test]
fn lebesgue_density_is_invariant_coefficientwise() {
    // (i+1) C(i+l+1, l) B(i+1, l+1) = 1 exactly
    for i in 1..=5u64 {
        for l in 0..200u64 {
            let lhs =
                BigUint::from(i + 1) * big_binomial(i + l + 1, l) * factorial(i) * factorial(l);
            assert_eq!(lhs, factorial(i + l + 1), "i={i} l={l}");
        }
        // the truncated λ_J lacks the mass of [1 − ω_J, 1), so its image has
        // c_l = P(Y ≤ 1 − ω_J) for Y ~ Beta(l+1, i+1)
        let len = 4000;
        let om = cell_left_complement(i as u32, len as u64);
        let lam = lebesgue_measure(i as u32, len).unwrap();
        let out = dual_apply(i as u32, &lam, 1e-2).unwrap();
        for (l, c) in out.coeffs.iter().take(3000).enumerate() {
            let want = 1.0 - beta_reg(i as f64 + 1.0, l as f64 + 1.0, om);
            assert!((c - want).abs() < 1e-9, "i={i} l={l} {c} {want}");
        }
    }
}

#[test]
fn two_step_gap_at_zero_from_incomplete_beta() {
    // T̂₁′δ₀ has density 2 on [0, 1/2); its image has density
    // c_l = 2 I_{1/2}(l+1, 2) on I_l
    let mut tv = 0.0;
    let mut covered = 0.0;
    for l in 0..200_000u64 {
        let c = 2.0 * beta_reg(l as f64 + 1.0, 2.0, 0.5);
        let g = if l == 0 { 2.0 } else { 0.0 };
        let h = cell_len(1, l);
        tv += (c - g).abs() * h;
        covered += c * h;
        if c < 1e-300 {
            break;
        }
    }
    // mass beyond the last cell is at most 1 − covered
    let slack = (1.0 - covered).max(0.0);
    let got = gap02(1, 0.0, 1e-10).unwrap();
    assert!(
        (got.value - tv).abs() <= got.slack + slack + 1e-10,
        "{got:?} vs {tv}"
    );
}

#[test]
fn delta_image_at_zero_is_twice_first_cell() {
    let mu = genkant::measures::delta_image(1, 0.0, 1e-12).unwrap();
    let want = PartitionMeasure::new(1, 0.0, vec![2.0], 0.0).unwrap();
    assert_eq!(mu.coeffs, want.coeffs);
}
