use brw_core::constants::{a_critical, b_iteration, b_roots, k_const, root_residual, survival_certificate, Roots};
use proptest::prelude::*;

proptest! {
    #[test]
    fn roots_solve_the_threshold_equation(sigma_sq in 0.05f64..20.0, excess in 1e-3f64..10.0) {
        let a = a_critical(sigma_sq).unwrap() + excess;
        let Roots::Pair { b_small, b_a } = b_roots(sigma_sq, a).unwrap() else { panic!("two roots expected") };
        let k = k_const(sigma_sq);
        for b in [b_small, b_a] {
            prop_assert!((b + k / (b * b) - a).abs() < 1e-9 * a);
            prop_assert!(root_residual(sigma_sq, a, b).abs() < 1e-8 * a * b * b);
        }
        let vertex = 2.0 * a_critical(sigma_sq).unwrap() / 3.0;
        prop_assert!(0.0 < b_small && b_small < vertex && vertex < b_a && b_a < a);
    }

    #[test]
    fn roots_scale_with_sigma(sigma_sq in 0.1f64..5.0, ratio in 1.01f64..3.0, lambda in 0.2f64..5.0) {
        // (σ², a, b) ↦ (λ³σ², λa, λb) preserves a = b + K/b².
        let a = ratio * a_critical(sigma_sq).unwrap();
        let b = b_roots(sigma_sq, a).unwrap().b_a().unwrap();
        let scaled = b_roots(lambda.powi(3) * sigma_sq, lambda * a).unwrap().b_a().unwrap();
        prop_assert!((scaled - lambda * b).abs() < 1e-9 * scaled);
    }

    #[test]
    fn iteration_fixed_point_is_the_larger_root(sigma_sq in 0.1f64..5.0, ratio in 1.05f64..3.0, start in 0.0f64..2.0) {
        let a = ratio * a_critical(sigma_sq).unwrap();
        let b_a = b_roots(sigma_sq, a).unwrap().b_a().unwrap();
        let b0 = b_a * (1.0 + start);
        let it = b_iteration(sigma_sq, a, b0, 5000).unwrap();
        prop_assert!(!it.stopped_negative);
        let last = *it.iterates.last().unwrap();
        prop_assert!((last - b_a).abs() < 1e-8 * b_a, "{} vs {}", last, b_a);
    }

    #[test]
    fn certificate_stays_negative_for_larger_factors(sigma_sq in 0.2f64..4.0, ratio in 1.02f64..2.0, pos in 0.05f64..0.95, e in 2u64..200) {
        let a = ratio * a_critical(sigma_sq).unwrap();
        let Roots::Pair { b_small, b_a } = b_roots(sigma_sq, a).unwrap() else { panic!() };
        let b = b_small + pos * (b_a - b_small);
        if survival_certificate(sigma_sq, a, b, e).unwrap().negative {
            for larger in [e + 1, 2 * e, 10 * e] {
                prop_assert!(survival_certificate(sigma_sq, a, b, larger).unwrap().negative);
            }
        }
    }
}

#[test]
fn below_critical_has_no_root_and_iteration_goes_negative() {
    let a = 4.0;
    assert_eq!(b_roots(1.0, a).unwrap(), Roots::None);
    let it = b_iteration(1.0, a, 3.0, 1000).unwrap();
    assert!(it.stopped_negative);
}
