use cbe_core::asymptotics::*;
use cbe_core::exact_transform::{comparison_rhs, log_laplace, log_laplace_real, EnsembleParams};
use cbe_core::montecarlo::{compute_xn, log_density_unnormalized};
use cbe_core::specfun::{log_barnes_g, log_gamma, log_gamma_real, QuadratureSpec};
use cbe_core::tilt::{classify_regime, solve_tilt, Regime};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{LN_2, TAU};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence(x in 0.05f64..80.0) {
        let lhs = log_gamma_real(x + 1.0).unwrap();
        let rhs = log_gamma_real(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn complex_gamma_reflects_conjugation(re in 0.1f64..30.0, im in -30.0f64..30.0) {
        let z = Complex64::new(re, im);
        let a = log_gamma(z).unwrap();
        let b = log_gamma(z.conj()).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn barnes_recurrence(x in 0.2f64..40.0) {
        let lhs = log_barnes_g(x + 1.0).unwrap();
        let rhs = log_barnes_g(x).unwrap() + log_gamma_real(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn theta_round_trip(x in 1e-6f64..1e4) {
        let back = theta_inv(theta(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x);
    }

    #[test]
    fn theta_is_increasing(x in 1e-6f64..1e3, dx in 1e-4f64..1.0) {
        prop_assert!(theta(x + dx).unwrap() > theta(x).unwrap());
    }

    #[test]
    fn log_laplace_is_convex(n in 1usize..400, beta in 0.2f64..8.0, z in 0.0f64..20.0) {
        let p = EnsembleParams::new(n, beta, 0.0).unwrap();
        prop_assert!(log_laplace_real(&p, z, 2).unwrap() > 0.0);
        prop_assert!(log_laplace_real(&p, z, 1).unwrap() < n as f64 * LN_2);
    }

    #[test]
    fn log_laplace_vanishes_at_origin(n in 1usize..500, beta in 0.1f64..10.0) {
        let p = EnsembleParams::new(n, beta, 0.0).unwrap();
        prop_assert!(log_laplace_real(&p, 0.0, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn log_laplace_conjugate_symmetry(n in 1usize..100, beta in 0.3f64..6.0, re in 0.0f64..5.0, im in -5.0f64..5.0) {
        let p = EnsembleParams::new(n, beta, 0.0).unwrap();
        let a = log_laplace(&p, Complex64::new(re, im), 0).unwrap().value;
        let b = log_laplace(&p, Complex64::new(re, -im), 0).unwrap().value;
        prop_assert!((a - b.conj()).norm() < 1e-9 * a.norm().max(1.0));
    }

    #[test]
    fn delta_shift_is_tilting(n in 1usize..60, beta in 0.5f64..4.0, delta in 0.0f64..3.0, z in 0.0f64..3.0) {
        // Lambda_{N,beta,delta}(z) = Lambda_{N,beta,0}(z + 2 delta) - Lambda_{N,beta,0}(2 delta)
        let shifted = EnsembleParams::new(n, beta, delta).unwrap();
        let base = EnsembleParams::new(n, beta, 0.0).unwrap();
        let lhs = log_laplace_real(&shifted, z, 0).unwrap();
        let rhs = log_laplace_real(&base, z + 2.0 * delta, 0).unwrap() - log_laplace_real(&base, 2.0 * delta, 0).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn tilt_solves_the_mean_equation(n in 2usize..200, beta in 0.5f64..4.0, frac in 0.01f64..0.9) {
        let a = frac * n as f64 * LN_2;
        let s = solve_tilt(n, beta, a).unwrap();
        let p = EnsembleParams::new(n, beta, 0.0).unwrap();
        prop_assert!((log_laplace_real(&p, s.h, 1).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
        prop_assert!(s.legendre >= 0.0 && s.v > 0.0);
    }

    #[test]
    fn estimates_are_probabilities(ln_n in 3.0f64..30.0, beta in 0.5f64..4.0, x in 0.01f64..30.0) {
        let n = ln_n.exp();
        let e = estimate_clt_tail(n, beta, x).unwrap();
        prop_assert!(e.probability > 0.0 && e.probability <= 1.0);
        prop_assert!((e.log_probability - (e.prefactor.ln() + e.exponent)).abs() < 1e-9 * e.log_probability.abs().max(1.0));
    }

    #[test]
    fn regime_tags_are_total(n in 1usize..1_000_000, a in -10.0f64..1e6) {
        let tag = classify_regime(n, 2.0, a).tag;
        let sup = n as f64 * LN_2;
        prop_assert_eq!(tag == Regime::OutOfRange, !(a > 0.0 && a < sup));
    }

    #[test]
    fn xn_never_exceeds_maximum(angles in prop::collection::vec(1e-6f64..TAU - 1e-6, 1..20)) {
        prop_assert!(compute_xn(&angles) <= angles.len() as f64 * LN_2 + 1e-12);
    }

    #[test]
    fn density_is_rotation_invariant(angles in prop::collection::vec(0.0f64..TAU, 2..10), shift in 0.0f64..TAU, beta in 0.5f64..4.0) {
        let p = EnsembleParams::new(angles.len(), beta, 0.0).unwrap();
        let rotated: Vec<f64> = angles.iter().map(|t| (t + shift) % TAU).collect();
        let a = log_density_unnormalized(&p, &angles).unwrap();
        let b = log_density_unnormalized(&p, &rotated).unwrap();
        prop_assume!(a.is_finite());
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comparison_identity_holds(n in 2usize..40, beta in 0.3f64..5.0, z in 0.2f64..8.0) {
        let p = EnsembleParams::new(n, beta, 0.0).unwrap();
        let lhs = log_laplace_real(&p, z, 0).unwrap();
        let rhs = comparison_rhs(&p, z, &QuadratureSpec::default()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn rate_equivalence(x in 0.02f64..0.66) {
        let lhs = rate_i(theta_inv(x).unwrap()).unwrap();
        prop_assert!((lhs - hko_rate(x).unwrap()).abs() < 1e-8);
    }
}
