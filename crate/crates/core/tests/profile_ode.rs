use brw_core::constants::{a_critical, b_roots, k_const};
use brw_core::numeric::integrate;
use brw_core::profile_ode::{asymptotic_slope, blow_down_time, extinction_rate, rescale, solve_profile, ProfileClass};
use proptest::prelude::*;
use std::f64::consts::PI;

/// `ln(t_max / s³)` for `a < a_c`, from the autonomous form in `ln u`:
/// `3 ∫_0^∞ [r²/(r³ - a r² + K) - r²/(r³ + 1)] dr`.
fn log_t_max_oracle(sigma_sq: f64, a: f64) -> f64 {
    let k = k_const(sigma_sq);
    let g = |x: f64| {
        let r = x / (1.0 - x);
        let jac = 1.0 / ((1.0 - x) * (1.0 - x));
        let r2 = r * r;
        (r2 / (r2 * r - a * r2 + k) - r2 / (r2 * r + 1.0)) * jac
    };
    3.0 * integrate(g, 0.0, 1.0, 1e-13, 1e-14).unwrap()
}

#[test]
fn blow_down_time_matches_quadrature() {
    for a in [0.0, 1.0, 3.0, 4.0, 4.5] {
        let t = blow_down_time(1.0, a, 1.0, 1e-10).unwrap().unwrap();
        let oracle = log_t_max_oracle(1.0, a).exp();
        assert!((t - oracle).abs() < 1e-7 * oracle, "a={a}: {t} vs {oracle}");
    }
}

#[test]
fn blow_down_scales_with_cube_of_start() {
    let t1 = blow_down_time(1.0, 0.0, 1.0, 1e-10).unwrap().unwrap();
    let t2 = blow_down_time(1.0, 0.0, 2.0, 1e-10).unwrap().unwrap();
    assert!((t2 - 8.0 * t1).abs() < 1e-8 * t2);
    assert!((t1 - 2.0 / (3.0 * PI * PI)).abs() < 1e-8 * t1);
    assert_eq!(blow_down_time(1.0, 6.0, 1.0, 1e-9).unwrap(), None);
}

#[test]
fn extinction_rate_values() {
    let c0 = extinction_rate(1.0, 0.0, 1e-10).unwrap();
    assert!((c0 - (1.5 * PI * PI).cbrt()).abs() < 1e-8);
    assert!((c0 - 2.45540).abs() < 1e-4);
    let c4 = extinction_rate(1.0, 4.0, 1e-10).unwrap();
    assert!(c4 < c0);
    assert!((c4 - (-log_t_max_oracle(1.0, 4.0) / 3.0).exp()).abs() < 1e-7);
    let c8 = extinction_rate(8.0, 0.0, 1e-10).unwrap();
    assert!((c8 - 2.0 * c0).abs() < 1e-8);
    let mut prev = f64::INFINITY;
    for i in 0..9 {
        let c = extinction_rate(1.0, 0.5 * i as f64, 1e-9).unwrap();
        assert!(c < prev);
        prev = c;
    }
}

#[test]
fn rate_close_to_critical_stays_finite() {
    let ac = a_critical(1.0).unwrap();
    let c = extinction_rate(1.0, ac - 1e-3, 1e-9).unwrap();
    assert!(c > 0.0 && c < 1.0);
    let oracle = (-log_t_max_oracle(1.0, ac - 1e-3) / 3.0).exp();
    assert!((c - oracle).abs() < 1e-6 * oracle.max(1e-300), "{c} vs {oracle}");
}

#[test]
fn dichotomy_is_sharp() {
    for a in [3.0, 4.0, 4.5] {
        let sol = solve_profile(1.0, a, 1.0, 1.0, 1e-9).unwrap();
        assert!(matches!(sol.classification, ProfileClass::BlowsDown { .. }), "a={a}");
    }
    for a in [4.8, 5.5, 7.0] {
        let sol = solve_profile(1.0, a, 1.0, 1.0, 1e-9).unwrap();
        assert!(matches!(sol.classification, ProfileClass::GrowsLikeCubeRoot { .. }), "a={a}");
    }
}

#[test]
fn slopes_match_larger_root() {
    for (a, rel) in [(6.0, 0.01), (10.0, 0.01), (a_critical(1.0).unwrap() + 0.01, 0.05)] {
        let sol = solve_profile(1.0, a, 1.0, 1.0, 1e-9).unwrap();
        let b = asymptotic_slope(&sol).unwrap();
        let b_a = b_roots(1.0, a).unwrap().b_a().unwrap();
        assert!((b - b_a).abs() < rel * b_a, "a={a}: {b} vs {b_a}");
        assert!(b > 2.0 * a_critical(1.0).unwrap() / 3.0);
    }
    let b10 = b_roots(1.0, 10.0).unwrap().b_a().unwrap();
    assert!((b10.powi(3) - 10.0 * b10 * b10 + 14.8044).abs() < 1e-3);
    assert!((b10 - 9.85).abs() < 0.01);
}

#[test]
fn slope_rejects_blow_down() {
    let sol = solve_profile(1.0, 2.0, 1.0, 1.0, 1e-9).unwrap();
    assert!(asymptotic_slope(&sol).is_err());
}

#[test]
fn tracks_exact_ray_from_small_start() {
    let a = 6.0;
    let b = b_roots(1.0, a).unwrap().b_a().unwrap();
    let sol = solve_profile(1.0, a, 1e-6, 10.0, 1e-10).unwrap();
    for i in 0..=100 {
        let t = 0.1 + 9.9 * i as f64 / 100.0;
        let f = sol.eval_f(t).unwrap();
        assert!((f - b * t.cbrt()).abs() < 1e-4, "t={t}: {f} vs {}", b * t.cbrt());
    }
}

#[test]
fn monotone_in_drift() {
    let sols: Vec<_> = [2.0, 4.0, 5.0, 6.0].iter().map(|&a| solve_profile(1.0, a, 1.0, 50.0, 1e-9).unwrap()).collect();
    for w in sols.windows(2) {
        for &u in &w[0].grid {
            if let (Some(lo), Some(hi)) = (w[0].eval_h(u), w[1].eval_h(u)) {
                assert!(lo <= hi + 1e-9, "u={u}: {lo} > {hi}");
            }
        }
    }
}

#[test]
fn residual_within_tolerance() {
    for a in [0.0, 2.0, 4.5, 5.0, 8.0] {
        for tol in [1e-6, 1e-9] {
            let sol = solve_profile(1.3, a, 0.7, 100.0, tol).unwrap();
            assert!(sol.residual_max <= tol, "a={a} tol={tol}: {}", sol.residual_max);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rescale_commutes_with_solve(
        sigma_sq in 0.3f64..3.0,
        a in 0.0f64..9.0,
        s in 0.2f64..3.0,
        lambda in 0.1f64..10.0,
    ) {
        let ac = a_critical(sigma_sq).unwrap();
        prop_assume!((a - ac).abs() > 0.2);
        let tol = 1e-8;
        let sol = solve_profile(sigma_sq, a, s, 20.0, tol).unwrap();
        let scaled = rescale(&sol, lambda);
        let direct = solve_profile(sigma_sq, a, scaled.s, 20.0, tol).unwrap();
        for (&u, &h) in scaled.grid.iter().zip(&scaled.values) {
            if let Some(d) = direct.eval_h(u) {
                // h(u) is ill-conditioned where |h'| is large (close to blow-down)
                let slope = (a - k_const(sigma_sq) * u * u / (h * h)).abs().max(1.0);
                prop_assert!((d - h).abs() <= 5.0 * tol * (scaled.s + a * u) * slope, "u={} {} vs {}", u, d, h);
            }
        }
        match (scaled.classification, direct.classification) {
            (ProfileClass::BlowsDown { t_max: x, .. }, ProfileClass::BlowsDown { t_max: y, .. }) => {
                prop_assert!((x - y).abs() <= 1e-6 * y)
            }
            (ProfileClass::GrowsLikeCubeRoot { b_limit: x }, ProfileClass::GrowsLikeCubeRoot { b_limit: y }) => {
                prop_assert!((x - y).abs() <= 1e-3 * y)
            }
            _ => prop_assert!(false, "classification changed under rescaling"),
        }
    }
}
