use lurepwa::nonlin::PolyTerm;
use lurepwa::*;
use proptest::prelude::*;

fn saturated_cubic(coeff: f64, knee: f64) -> Nonlinearity {
    Nonlinearity::poly_sat(vec![PolyTerm { power: 3.0, coeff }], knee).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eta_is_closed_form_and_bounded(coeff in 0.1f64..5.0, knee in 0.2f64..3.0, eta_ref in 0.05f64..4.0) {
        let nl = saturated_cubic(coeff, knee);
        let a = build_partition(&nl, eta_ref).unwrap();
        let ell = derivative_image_length(&nl).unwrap();
        let m = (a.regions() - 1) / 2;
        prop_assert!(a.eta <= eta_ref);
        prop_assert!((a.eta - ell / (2.0 * (m as f64 + 1.0))).abs() <= 1e-9);
        let (_, big) = required_partition_size(&nl, eta_ref).unwrap();
        prop_assert_eq!(big, a.regions());
        // one level fewer would overshoot eta_ref
        if m > 0 {
            prop_assert!(ell / (2.0 * m as f64) > eta_ref * (1.0 - 1e-12));
        }
    }

    #[test]
    fn approximation_is_continuous_and_odd(coeff in 0.1f64..5.0, knee in 0.2f64..3.0, eta_ref in 0.05f64..4.0) {
        let nl = saturated_cubic(coeff, knee);
        let a = build_partition(&nl, eta_ref).unwrap();
        prop_assert!(a.validate().is_ok());
        for &b in &a.breakpoints {
            let i = a.region_of(b + 1e-12);
            let left = a.slopes[i - 1] * b + a.intercepts[i - 1];
            let right = a.slopes[i] * b + a.intercepts[i];
            prop_assert!((left - right).abs() <= 1e-9 * (1.0 + left.abs()));
        }
        for q in [0.1, 0.7, 1.3, 2.9, 7.0] {
            prop_assert!((evaluate_pwa(&a, q) + evaluate_pwa(&a, -q)).abs() <= 1e-12 * (1.0 + q));
        }
    }

    #[test]
    fn refinement_is_monotone(coeff in 0.1f64..5.0, e1 in 0.05f64..4.0, e2 in 0.05f64..4.0) {
        let nl = saturated_cubic(coeff, 1.0);
        let (fine, coarse) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = build_partition(&nl, fine).unwrap();
        let b = build_partition(&nl, coarse).unwrap();
        prop_assert!(a.regions() >= b.regions());
        prop_assert!(a.eta <= b.eta);
    }
}
