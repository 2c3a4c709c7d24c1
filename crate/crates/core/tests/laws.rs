use brw_core::laws::{criticality_check, sample_offspring, LaplaceProfile, OffspringLaw, Outcome};
use brw_core::rng::{RandomStream, StreamKey};
use proptest::prelude::*;

/// Mean and standard error of `Σ e^{-tξ}` over `runs` sampled sibling sets.
fn empirical_phi(law: &OffspringLaw, t: f64, runs: usize, seed: u64) -> (f64, f64) {
    let mut rng = RandomStream::from_seed(seed);
    let xs: Vec<f64> =
        (0..runs).map(|_| sample_offspring(law, &mut rng).iter().map(|x| (-t * x).exp()).sum()).collect();
    let mean = xs.iter().sum::<f64>() / runs as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    (mean, (var / runs as f64).sqrt())
}

#[test]
fn sampled_transform_matches_exact_transform() {
    let laws = [
        OffspringLaw::critical_gaussian(1.0).unwrap(),
        OffspringLaw::poisson_gaussian(2.5, -0.4, 0.6).unwrap(),
        OffspringLaw::finite(vec![
            Outcome::new(0.2, vec![]),
            Outcome::new(0.5, vec![0.3, -0.7]),
            Outcome::new(0.3, vec![1.1, 0.0, 2.0]),
        ])
        .unwrap(),
    ];
    for (i, law) in laws.iter().enumerate() {
        let profile = LaplaceProfile::from_law(law);
        for t in [0.0, 0.5, 1.0, 1.5] {
            let exact = profile.phi(t, 0).unwrap();
            let (mean, se) = empirical_phi(law, t, 1_000_000, 100 + i as u64);
            assert!((mean - exact).abs() < 4.0 * se, "law {i}, t={t}: {mean} ± {se} vs {exact}");
        }
    }
}

#[test]
fn critical_gaussian_normalization() {
    for s2 in [0.25, 1.0, 3.0] {
        let rep =
            criticality_check(&LaplaceProfile::from_law(&OffspringLaw::critical_gaussian(s2).unwrap()), 1e-12).unwrap();
        assert!(rep.is_critical);
        assert!((rep.sigma_sq - s2).abs() < 1e-12 * s2);
    }
}

fn arb_finite_law() -> impl Strategy<Value = OffspringLaw> {
    (prop::collection::vec((0.05f64..1.0, prop::collection::vec(-3.0f64..3.0, 0..4)), 0..4), 0.05f64..1.0, -3.0f64..3.0)
        .prop_map(|(mut raw, p, x)| {
            raw.push((p, vec![x]));
            let total: f64 = raw.iter().map(|r| r.0).sum();
            OffspringLaw::finite(raw.into_iter().map(|(p, d)| Outcome::new(p / total, d)).collect()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn psi_derivatives_are_consistent(law in arb_finite_law(), t in 0.1f64..2.0) {
        let p = LaplaceProfile::from_law(&law);
        prop_assume!(p.phi(t, 0).unwrap() > 0.0);
        let (psi, d1, d2) = p.psi_derivatives(t).unwrap();
        let h = 1e-4;
        let fd1 = (p.psi(t + h).unwrap() - p.psi(t - h).unwrap()) / (2.0 * h);
        prop_assert!((psi - p.phi(t, 0).unwrap().ln()).abs() < 1e-12 * psi.abs().max(1.0));
        prop_assert!((d1 - fd1).abs() < 1e-5 * d1.abs().max(1.0));
        // Ψ is convex: it is the log of a sum of exponentials.
        prop_assert!(d2 >= -1e-10);
    }

    #[test]
    fn transform_matches_direct_sum(law in arb_finite_law(), t in 0.0f64..2.0) {
        let OffspringLaw::FiniteSupport { outcomes } = &law else { unreachable!() };
        let direct: f64 = outcomes.iter().map(|o| o.prob * o.displacements.iter().map(|x| (-t * x).exp()).sum::<f64>()).sum();
        let phi = LaplaceProfile::from_law(&law).phi(t, 0).unwrap();
        prop_assert!((phi - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn sampling_is_a_function_of_the_key(law in arb_finite_law(), seed in any::<u64>()) {
        let a = sample_offspring(&law, &mut StreamKey(seed).stream());
        let b = sample_offspring(&law, &mut StreamKey(seed).stream());
        prop_assert_eq!(a, b);
    }
}
