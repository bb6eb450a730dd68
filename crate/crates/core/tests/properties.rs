use std::f64::consts::TAU;

use kaclab_core::coefficients::{sample_coefficients, CoefficientLaw, PolynomialSample};
use kaclab_core::evaluator::{horner_eval, tail_functional, LayerEvaluator, RootTable};
use kaclab_core::gram::{gram_det, image_norm_sq};
use kaclab_core::region::{build_region_spec, nearest_center_distance_brute, Regime};
use kaclab_core::roots::{default_tol, find_roots, DEFAULT_MAX_ITER};
use kaclab_core::Complex64;
use proptest::prelude::*;

fn coeffs(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_matches_horner(c in coeffs(200), phi in 0.0f64..TAU) {
        let n = c.len();
        let mut ev = LayerEvaluator::new(n);
        let vals = ev.values(&c, phi).to_vec();
        let scale: f64 = c.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        for (k, v) in vals.iter().enumerate() {
            let z = Complex64::from_polar(1.0, TAU * k as f64 / n as f64 + phi);
            prop_assert!((v - horner_eval(&c, z)).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn parseval(c in coeffs(300), phi in 0.0f64..TAU) {
        let n = c.len();
        let mut ev = LayerEvaluator::new(n);
        let energy: f64 = ev.values(&c, phi).iter().map(|v| v.norm_sqr()).sum();
        let mass: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((energy - n as f64 * mass).abs() <= 1e-10 * (n as f64 * mass).max(1.0));
    }

    #[test]
    fn root_table_matches_layer(c in coeffs(100), k_frac in 0.0f64..1.0) {
        let n = c.len();
        let k = ((k_frac * n as f64) as usize).min(n - 1);
        let bin = RootTable::new(n).bin(&c, k);
        let layer = LayerEvaluator::new(n).values(&c, 0.0)[k];
        prop_assert!((bin - layer).norm() <= 1e-11 * c.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
    }

    #[test]
    fn tail_is_monotone(c in coeffs(100), d1 in 0.0f64..0.1, d2 in 0.0f64..0.1) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(tail_functional(&c, lo) <= tail_functional(&c, hi));
        // dominates the modulus on the closed disk of radius 1 + δ
        let z = Complex64::from_polar(1.0 + hi, 0.7);
        prop_assert!(horner_eval(&c, z).norm() <= tail_functional(&c, hi) * (1.0 + 1e-12));
    }

    #[test]
    fn gram_det_at_zero_offset(n in 3usize..400, k_frac in 0.0f64..1.0) {
        let k = 1 + ((k_frac * (n - 1) as f64) as usize).min(n - 2);
        let det = gram_det(n, k, 0.0).unwrap();
        let expected = if 2 * k == n { 0.0 } else { (n * n) as f64 / 4.0 };
        prop_assert!((det - expected).abs() <= 1e-6 * (n * n) as f64);
    }

    #[test]
    fn image_norm_is_quadratic(n in 8usize..200, k in 1usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.1f64..4.0) {
        let base = image_norm_sq(n, k, 0.0, [a, b]).unwrap();
        let scaled = image_norm_sq(n, k, 0.0, [s * a, s * b]).unwrap();
        prop_assert!((scaled - s * s * base).abs() <= 1e-9 * scaled.max(1.0));
    }

    #[test]
    fn nearest_center_fast_path(n in 4usize..60, beta in 0.0f64..1.5, r in 0.8f64..1.2, th in 0.0f64..TAU) {
        let spec = build_region_spec(n, 1.0, beta, Regime::Third).unwrap();
        let z = Complex64::from_polar(r, th);
        let fast = spec.nearest_center_distance(z);
        let brute = nearest_center_distance_brute(&spec, z);
        prop_assert!((fast - brute).abs() <= 1e-12);
    }

    #[test]
    fn roots_certified_and_conjugate_closed(seed in 0u64..1000, n in 8usize..96) {
        let s = sample_coefficients(CoefficientLaw::Rademacher, n, seed, 0).unwrap();
        let rs = find_roots(&s, default_tol(n), DEFAULT_MAX_ITER).unwrap();
        prop_assert_eq!(rs.roots.len(), n - 1);
        prop_assert!(rs.residuals_certified(&s.coefficients));
        prop_assert!(rs.conjugate_mismatch() <= 1e-6);
    }

    #[test]
    fn regenerate_is_exact(seed in any::<u64>(), trial in any::<u64>(), n in 2usize..64) {
        let s = sample_coefficients(CoefficientLaw::gaussian(1.5).unwrap(), n, seed, trial).unwrap();
        let again: PolynomialSample = s.regenerate().unwrap().unwrap();
        prop_assert_eq!(s, again);
    }
}
