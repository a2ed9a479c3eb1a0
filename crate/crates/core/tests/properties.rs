use genkant::discsim::{disc_trajectory, DiscState};
use genkant::measures::{
    delta_image, dual_apply, lattice_min_mass, tv_distance, tv_to_lebesgue, PartitionMeasure,
};
use genkant::observable::{Observable, Polynomial};
use genkant::operators::{apply_bernstein, apply_kantorovich, apply_mkz};
use genkant::seqcore::{
    alpha_weights, beta_weights, cell_left, pivot_index, window_mass, KantorovichWeights,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-3.0f64..3.0, 1..6).prop_map(Polynomial::new)
}

fn probability(i: u32) -> impl Strategy<Value = PartitionMeasure> {
    (prop::collection::vec(0.0f64..1.0, 1..40), 0.0f64..0.5).prop_map(move |(mut c, atom)| {
        let dens: f64 = c
            .iter()
            .enumerate()
            .map(|(l, v)| v * genkant::seqcore::cell_len(i, l as u64))
            .sum();
        if dens == 0.0 {
            c[0] = 1.0;
        }
        let dens: f64 = c
            .iter()
            .enumerate()
            .map(|(l, v)| v * genkant::seqcore::cell_len(i, l as u64))
            .sum();
        let s = (1.0 - atom) / dens;
        let c = c.into_iter().map(|v| v * s).collect();
        PartitionMeasure::new(i, atom, c, 0.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_ratio_laws(i in 1u32..8, x in 0.01f64..0.99) {
        let b = beta_weights(i, x, 200).unwrap();
        let a = alpha_weights(i, x, 200).unwrap();
        for j in 0..199 {
            let jf = j as f64;
            let fi = i as f64;
            if b[j] > 1e-290 && b[j + 1] > 1e-290 {
                prop_assert!(rel(b[j + 1] / b[j], (1.0 + (fi - 1.0) / (jf + 1.0)) * x) < 1e-12);
                prop_assert!(rel(a[j + 1] / a[j], (1.0 + (fi + 1.0) / (jf + 1.0)) * x) < 1e-12);
            }
        }
    }

    #[test]
    fn weights_are_normalized(i in 1u32..8, x in 0.0f64..0.999, e in 4i32..13) {
        let eps = 10f64.powi(-e);
        let w = KantorovichWeights::new(i, x, eps).unwrap();
        let s: f64 = w.betas.iter().sum();
        prop_assert!(w.tail_bound <= eps);
        prop_assert!(s <= 1.0 + 1e-12);
        prop_assert!((s + w.tail_bound - 1.0).abs() <= 1e-12 + w.tail_bound);
    }

    #[test]
    fn pivot_cell_contains_x(i in 1u32..20, x in 0.0f64..0.9999) {
        let j = pivot_index(i, x).unwrap();
        prop_assert!(cell_left(i, j) <= x && x < cell_left(i, j + 1));
    }

    #[test]
    fn peaks_interleave_with_pivot(i in 2u32..10, x in 0.5f64..0.995) {
        let w = KantorovichWeights::new(i, x, 1e-12).unwrap();
        prop_assert!(w.beta_peak < w.pivot && w.pivot <= w.alpha_peak);
    }

    #[test]
    fn window_mass_is_a_probability(i in 1u32..6, x in 0.0f64..0.999, r in 0.05f64..0.95) {
        let m = window_mass(i, x, r).unwrap();
        prop_assert!(m > 0.0 && m <= 1.0 + 1e-12);
    }

    #[test]
    fn operators_are_markov(f in poly(), i in 1u32..5, x in 0.0f64..1.0) {
        let eps = 1e-10;
        let one = Polynomial::constant(1.0);
        prop_assert!((apply_kantorovich(i, &one, x, eps).unwrap() - 1.0).abs() < 1e-8);
        prop_assert!((apply_mkz(i, &one, x, eps).unwrap() - 1.0).abs() < 1e-8);
        // positivity through the sup bound |Tf| ≤ sup |f|
        let sup = (0..=400).map(|k| f.eval(k as f64 / 400.0).abs()).fold(0.0, f64::max);
        let bound = f.coeffs().iter().map(|c| c.abs()).sum::<f64>();
        let t = apply_kantorovich(i, &f, x, eps).unwrap();
        prop_assert!(t.abs() <= bound.min(sup * 1.01 + 1e-6) + 1e-8);
        // the boundary point is fixed
        let t1 = apply_kantorovich(i, &f, 1.0, eps).unwrap();
        prop_assert!((t1 - f.eval(1.0)).abs() < 1e-12);
    }

    #[test]
    fn bernstein_fixes_affine(k in 1u32..12, a in -2.0f64..2.0, b in -2.0f64..2.0, x in 0.0f64..1.0) {
        let f = Polynomial::new(vec![a, b]);
        prop_assert!((apply_bernstein(k, &f, x).unwrap() - f.eval(x)).abs() < 1e-12);
    }

    #[test]
    fn delta_images_are_probabilities(i in 1u32..6, x in 0.0f64..0.99) {
        let mu = delta_image(i, x, 1e-10).unwrap();
        prop_assert!((mu.mass() - 1.0).abs() <= 1e-10 + mu.tail_mass_bound);
        prop_assert!(mu.coeffs.iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn dual_conserves_mass(i in 1u32..4, x in 0.0f64..0.95) {
        let mu = delta_image(i, x, 1e-9).unwrap();
        let out = dual_apply(i, &mu, 1e-6).unwrap();
        prop_assert!((out.mass() + out.tail_mass_bound - 1.0).abs() <= 1e-6);
        prop_assert!(out.mass() <= 1.0 + 1e-9);
    }

    #[test]
    fn wedge_identity(mu in probability(2), nu in probability(2)) {
        let tv = tv_distance(&mu, &nu).unwrap();
        let w = lattice_min_mass(&mu, &nu).unwrap();
        prop_assert!((tv.value - 2.0 * (1.0 - w.value)).abs() <= 1e-9 + tv.slack + 2.0 * w.slack);
        prop_assert!(tv.value >= -1e-12 && tv.value <= 2.0 + 1e-12);
    }

    #[test]
    fn tv_is_a_metric(a in probability(1), b in probability(1), c in probability(1)) {
        let ab = tv_distance(&a, &b).unwrap().value;
        let ba = tv_distance(&b, &a).unwrap().value;
        let bc = tv_distance(&b, &c).unwrap().value;
        let ac = tv_distance(&a, &c).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(tv_distance(&a, &a).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn dual_contracts_distance_to_lebesgue(i in 1u32..3, x in 0.0f64..0.9) {
        let mu = delta_image(i, x, 1e-9).unwrap();
        let before = tv_to_lebesgue(&mu);
        let after = tv_to_lebesgue(&dual_apply(i, &mu, 1e-6).unwrap());
        prop_assert!(after.lower() <= before.upper() + 1e-12);
    }

    #[test]
    fn csv_round_trip(mu in probability(3)) {
        let back = PartitionMeasure::from_csv(&mu.to_csv("cfg")).unwrap();
        prop_assert_eq!(back, mu);
    }

    #[test]
    fn polynomial_display_parses_back(f in poly()) {
        let g = Polynomial::parse(&f.to_string()).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            prop_assert!((f.eval(t) - g.eval(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn disc_chain_stays_in_the_disc(re in -0.7f64..0.7, im in -0.7f64..0.7, seed in any::<u64>()) {
        let z0 = DiscState::new(re, im).unwrap();
        let t = disc_trajectory(z0, 500, seed).unwrap();
        prop_assert!(t.iter().all(|z| z.norm_sqr() <= 1.0 + 1e-12));
    }
}
