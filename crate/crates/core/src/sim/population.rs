use serde::Serialize;

use super::barrier::Barrier;
use crate::laws::{LawSampler, OffspringLaw};
use crate::rng::{mix64, StreamKey};

const PRIORITY_SALT: u64 = 0xA076_1D64_78BD_642F;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Particle {
    pub position: f64,
    pub weight: f64,
}

/// The living generation of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PopulationState {
    pub generation: u64,
    pub particles: Vec<Particle>,
    /// The cap was engaged at least once.
    pub truncated: bool,
    /// First generation with no particle.
    pub extinct_at: Option<u64>,
}

impl PopulationState {
    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

/// One run's generation, stored flat. All particles share one weight.
#[derive(Clone, Debug)]
pub(crate) struct Cloud {
    pub generation: u64,
    pub positions: Vec<f64>,
    pub labels: Vec<u64>,
    pub weight: f64,
    /// XORed into labels when keying streams; clones get fresh salts.
    pub salt: u64,
    pub truncated: bool,
    pub extinct_at: Option<u64>,
}

impl Cloud {
    pub fn root(key: StreamKey) -> Self {
        Cloud {
            generation: 0,
            positions: vec![0.0],
            labels: vec![key.0],
            weight: 1.0,
            salt: 0,
            truncated: false,
            extinct_at: None,
        }
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }

    /// Advances one generation. `killed(i, v)` is evaluated on every child at
    /// birth. Above `cap` survivors, a uniform subsample of size `cap` is kept;
    /// with `reweight` the weight absorbs the thinning ratio.
    pub fn advance<K: Fn(u64, f64) -> bool>(
        &mut self,
        sampler: &LawSampler,
        killed: &K,
        cap: usize,
        reweight: bool,
        buf: &mut Vec<f64>,
    ) {
        let i = self.generation + 1;
        let mut positions = Vec::with_capacity(self.positions.len() * 2);
        let mut labels = Vec::with_capacity(self.positions.len() * 2);
        for (&x, &label) in self.positions.iter().zip(&self.labels) {
            let mut rng = StreamKey(label ^ self.salt).stream();
            buf.clear();
            sampler.sample_into(&mut rng, buf);
            let parent = StreamKey(label);
            for (idx, &d) in buf.iter().enumerate() {
                let v = x + d;
                if !killed(i, v) {
                    positions.push(v);
                    labels.push(parent.child(idx as u64).0);
                }
            }
        }
        if positions.len() > cap {
            let n = positions.len();
            let salt = self.salt ^ PRIORITY_SALT;
            let mut order: Vec<(u64, u32)> =
                labels.iter().enumerate().map(|(j, &l)| (mix64(l ^ salt), j as u32)).collect();
            order.select_nth_unstable(cap - 1);
            let mut keep: Vec<u32> = order[..cap].iter().map(|&(_, j)| j).collect();
            keep.sort_unstable();
            positions = keep.iter().map(|&j| positions[j as usize]).collect();
            labels = keep.iter().map(|&j| labels[j as usize]).collect();
            if reweight {
                self.weight *= n as f64 / cap as f64;
            }
            self.truncated = true;
        }
        self.positions = positions;
        self.labels = labels;
        self.generation = i;
        if self.positions.is_empty() && self.extinct_at.is_none() {
            self.extinct_at = Some(i);
        }
    }

    /// Runs generations up to `n`, stopping early at extinction.
    pub fn run_to<K: Fn(u64, f64) -> bool>(
        &mut self,
        sampler: &LawSampler,
        killed: &K,
        n: u64,
        cap: usize,
        reweight: bool,
    ) {
        let mut buf = Vec::new();
        while self.generation < n && !self.is_extinct() {
            self.advance(sampler, killed, cap, reweight, &mut buf);
        }
        if self.is_extinct() {
            self.generation = self.generation.max(n);
        }
    }

    pub fn into_state(self) -> PopulationState {
        let w = self.weight;
        PopulationState {
            generation: self.generation,
            particles: self.positions.into_iter().map(|position| Particle { position, weight: w }).collect(),
            truncated: self.truncated,
            extinct_at: self.extinct_at,
        }
    }
}

/// Runs the process killed strictly above `barrier` for `n` generations.
///
/// The cap keeps a uniform subsample of survivors; weights stay 1, so only
/// the alive/extinct indicator is reliable once `truncated` is set.
/// Criticality of `law` is not enforced here.
pub fn simulate(law: &OffspringLaw, barrier: &Barrier, n: u64, cap: usize, key: StreamKey) -> PopulationState {
    simulate_with(law, |i, v| v > barrier.phi(i), n, cap, false, key)
}

/// [`simulate`] with an arbitrary kill rule `killed(generation, position)`.
/// With `reweight`, thinning by the cap is compensated in the weights, so
/// the total weight is an unbiased estimate of the uncapped count.
pub fn simulate_with<K: Fn(u64, f64) -> bool>(
    law: &OffspringLaw,
    killed: K,
    n: u64,
    cap: usize,
    reweight: bool,
    key: StreamKey,
) -> PopulationState {
    let mut cloud = Cloud::root(key);
    cloud.run_to(&law.sampler(), &killed, n, cap.max(1), reweight);
    cloud.into_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::Outcome;
    use proptest::prelude::*;

    fn lattice_law() -> OffspringLaw {
        OffspringLaw::finite(vec![
            Outcome::new(0.2, vec![]),
            Outcome::new(0.3, vec![-1.0]),
            Outcome::new(0.3, vec![1.0, -1.0]),
            Outcome::new(0.2, vec![2.0, 0.0, -2.0]),
        ])
        .unwrap()
    }

    #[test]
    fn deterministic_unit_step_dies_at_first_generation() {
        let law = OffspringLaw::finite(vec![Outcome::new(1.0, vec![1.0])]).unwrap();
        for seed in 0..20 {
            let st = simulate(&law, &Barrier::PowerLaw { a: 0.0 }, 10, 100, StreamKey::from_seed(seed));
            assert_eq!(st.extinct_at, Some(1));
            assert!(st.particles.is_empty());
        }
    }

    #[test]
    fn ties_survive() {
        let law = OffspringLaw::finite(vec![Outcome::new(1.0, vec![0.0])]).unwrap();
        let st = simulate(&law, &Barrier::PowerLaw { a: 0.0 }, 5, 10, StreamKey::from_seed(1));
        assert_eq!(st.extinct_at, None);
        assert_eq!(st.particles.len(), 1);
    }

    #[test]
    fn unbinding_barrier_reproduces_galton_watson_mean() {
        let law = OffspringLaw::critical_gaussian(1.0).unwrap();
        let n = 8;
        let runs = 10_000u64;
        let sizes: Vec<f64> = (0..runs)
            .map(|r| {
                simulate(&law, &Barrier::PowerLaw { a: 1e6 }, n, usize::MAX, StreamKey::from_seed(3).child(r))
                    .particles
                    .len() as f64
            })
            .collect();
        let mean = sizes.iter().sum::<f64>() / runs as f64;
        let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let expected = law.mean_children().powi(n as i32);
        assert!((mean - expected).abs() < 3.0 * (var / runs as f64).sqrt(), "{mean} vs {expected}");
    }

    #[test]
    fn negative_linear_barrier_kills_every_run() {
        let law = OffspringLaw::critical_gaussian(1.0).unwrap();
        for r in 0..1000 {
            let st = simulate(&law, &Barrier::Linear { eps: -0.1 }, 200, 10_000, StreamKey::from_seed(5).child(r));
            assert!(st.extinct_at.is_some());
        }
    }

    #[test]
    fn reweighted_cap_is_unbiased_for_counts() {
        let law = OffspringLaw::critical_gaussian(1.0).unwrap();
        let n = 10;
        let runs = 4000u64;
        let total: f64 = (0..runs)
            .map(|r| simulate_with(&law, |_, _| false, n, 20, true, StreamKey::from_seed(9).child(r)).total_weight())
            .sum();
        let expected = law.mean_children().powi(n as i32);
        let mean = total / runs as f64;
        assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
    }

    fn arb_barrier() -> impl Strategy<Value = Barrier> {
        prop_oneof![
            (-1.0..6.0f64).prop_map(|a| Barrier::PowerLaw { a }),
            (-0.5..0.5f64).prop_map(|eps| Barrier::Linear { eps }),
            (0.0..6.0f64, 0.0..6.0f64).prop_map(|(a_plus, a_minus)| Barrier::OscillatingParity { a_plus, a_minus }),
            (0.0..6.0f64, 0.0..3.0f64, 2u64..5).prop_map(|(a_plus, a_minus, base)| Barrier::SparseDip {
                a_plus,
                a_minus,
                base
            }),
            prop::collection::vec(-2.0..4.0f64, 1..8).prop_map(|values| Barrier::Table { values }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stored_particles_respect_the_barrier(barrier in arb_barrier(), seed in any::<u64>(), gaussian in any::<bool>(), n in 1u64..25) {
            let law = if gaussian { OffspringLaw::critical_gaussian(1.0).unwrap() } else { lattice_law() };
            let mut cloud = Cloud::root(StreamKey::from_seed(seed));
            let sampler = law.sampler();
            let mut buf = Vec::new();
            let killed = |i: u64, v: f64| v > barrier.phi(i);
            while cloud.generation < n && !cloud.is_extinct() {
                cloud.advance(&sampler, &killed, 200, false, &mut buf);
                let limit = barrier.phi(cloud.generation);
                prop_assert!(cloud.positions.iter().all(|&v| v <= limit));
            }
        }

        #[test]
        fn raising_the_barrier_never_kills_a_survivor(a in -0.5..5.0f64, lift in 0.0..2.0f64, seed in any::<u64>(), n in 1u64..20) {
            let law = OffspringLaw::critical_gaussian(1.0).unwrap();
            let key = StreamKey::from_seed(seed);
            let low = simulate(&law, &Barrier::PowerLaw { a }, n, usize::MAX, key);
            let high = simulate(&law, &Barrier::PowerLaw { a: a + lift }, n, usize::MAX, key);
            if low.extinct_at.is_none() {
                prop_assert!(high.extinct_at.is_none());
            }
            prop_assert!(high.particles.len() >= low.particles.len());
        }

        #[test]
        fn single_worker_trajectories_are_reproducible(seed in any::<u64>()) {
            let law = lattice_law();
            let b = Barrier::PowerLaw { a: 1.0 };
            prop_assert_eq!(simulate(&law, &b, 15, 50, StreamKey::from_seed(seed)), simulate(&law, &b, 15, 50, StreamKey::from_seed(seed)));
        }
    }
}
