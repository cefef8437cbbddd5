use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use waveop_lab::bessel::spherical_bessel;
use waveop_lab::dilation::{mellin_pair, r_symbol, theta, theta_multiplier};
use waveop_lab::grids::make_log_energy_grid;
use waveop_lab::levinson::sweep_nodes;
use waveop_lab::linalg::{operator_norm, CMatrix};
use waveop_lab::lippmann_schwinger::{ls_grid, s_matrix_channel, unwrap_half_phase};
use waveop_lab::potentials::Potential;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn theta_lies_on_the_half_circle(nu in -20.0..20.0f64) {
        let z = theta(nu);
        prop_assert!(((z - 0.5).norm() - 0.5).abs() < 1e-14);
        prop_assert!(z.im <= 0.0);
        prop_assert!((z - r_symbol(-2.0 * nu)).norm() < 1e-15);
        // 1 - theta(nu) = conj(theta(-nu))
        prop_assert!((Complex64::new(1.0, 0.0) - z - theta(-nu).conj()).norm() < 1e-15);
    }

    #[test]
    fn bessel_wronskian_is_inverse_square(l in 0usize..=8, x in 0.05..60.0f64) {
        let b = spherical_bessel(l, x).unwrap();
        let expect = 1.0 / (x * x);
        prop_assert!((b.wronskian() - expect).abs() <= 1e-9 * expect, "{b:?}");
    }

    #[test]
    fn half_phase_unwrap_is_a_continuous_branch(steps in prop::collection::vec(-1.2..1.2f64, 2..60), start in -10.0..10.0f64) {
        let mut delta = vec![start];
        for s in &steps {
            delta.push(delta[delta.len() - 1] + s);
        }
        let s: Vec<Complex64> = delta.iter().map(|d| Complex64::from_polar(1.0, 2.0 * d)).collect();
        let (out, max_step) = unwrap_half_phase(&s);
        let shift = out[0] - delta[0];
        prop_assert!(((shift / PI).round() * PI - shift).abs() < 1e-9);
        for (a, b) in out.iter().zip(&delta) {
            prop_assert!((a - b - shift).abs() < 1e-9);
        }
        prop_assert!(max_step <= 1.2 + 1e-9);
    }

    #[test]
    fn sweep_nodes_are_geometric(k_min in 1e-3..1.0f64, ratio in 2.0..1e4f64, n in 3usize..200) {
        let k = sweep_nodes(k_min, k_min * ratio, n);
        prop_assert_eq!(k.len(), n);
        prop_assert!((k[0] - k_min).abs() <= 1e-14 * k_min);
        prop_assert!((k[n - 1] / (k_min * ratio) - 1.0).abs() < 1e-12);
        let q = k[1] / k[0];
        prop_assert!(k.windows(2).all(|w| (w[1] / w[0] / q - 1.0).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mellin_transform_is_unitary(log_n in 6u32..10, span in 2.0..30.0f64, seed in complex_vec(512)) {
        let n = 1usize << log_n;
        let grid = make_log_energy_grid(n, (-span).exp(), span.exp()).unwrap();
        let pair = mellin_pair(&grid).unwrap();
        let u = &seed[..n];
        let w = pair.forward_unitary(u).unwrap();
        prop_assert!((norm(&w) - norm(u)).abs() < 1e-12 * norm(u));
        let back = pair.inverse_unitary(&w).unwrap();
        let err: Vec<Complex64> = back.iter().zip(u).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) < 1e-12 * norm(u));
    }

    #[test]
    fn theta_section_is_a_contraction_around_one_half(log_n in 6u32..9, span in 1.0..40.0f64) {
        let n = 1usize << log_n;
        let grid = make_log_energy_grid(n, (-span).exp(), span.exp()).unwrap();
        let m = theta_multiplier(&grid).unwrap();
        let t = m.toeplitz_matrix();
        let c = m.complement().toeplitz_matrix();
        let id = CMatrix::identity(n, n);
        prop_assert!(operator_norm(&(&t + &c - &id)) < 1e-14);
        // |2 theta - 1| = 1 on the symbol, so every section of 2 theta(A) - 1 contracts
        let two_t_minus_1 = t.scale(2.0) - &id;
        prop_assert!(operator_norm(&two_t_minus_1) <= 1.0 + 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn square_well_s_matrix_is_unitary(depth in -6.0..20.0f64, radius in 0.5..2.0f64, l in 0usize..=3) {
        let p = Potential::square_well(depth, radius);
        let grid_e = make_log_energy_grid(64, 1e-2, 1e2).unwrap();
        let grid_r = ls_grid(&p, 10.0).unwrap();
        let ch = s_matrix_channel(&p, l, &grid_e, &grid_r).unwrap();
        prop_assert!(ch.max_unitarity_defect < 1e-8, "{}", ch.max_unitarity_defect);
    }
}
