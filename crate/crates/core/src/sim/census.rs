use serde::{Deserialize, Serialize};

use super::population::Cloud;
use crate::constants::{a_critical, b_roots};
use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::laws::{critical_sigma_sq, OffspringLaw};
use crate::numeric::CompensatedSum;
use crate::rng::StreamKey;

/// Parameters of the two-barrier census.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusConfig {
    pub a: f64,
    /// Width of the corridor; `None` means `b_a`.
    pub b: Option<f64>,
    pub growth: u64,
    pub k_max: u32,
    pub runs: u64,
    pub eps: f64,
    /// Survivor cap with weight compensation; `None` disables thinning.
    pub cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusRecord {
    pub k: u32,
    pub n_k: u64,
    pub mean_count: f64,
    pub stderr: f64,
    /// `exp(E^{k/3}(b − ε))`
    pub exp_target: f64,
    /// `Φ(0)^{n_k}`, the mean size of the unkilled process.
    pub unconstrained_mean: f64,
    pub meets_target: bool,
}

/// Mean number of particles at `n_k = E^k` (`n_0 = 0`) whose whole ancestry stayed in
/// `[(a − b)·i^{1/3}, a·i^{1/3}]`.
///
/// With a cap, survivors are thinned uniformly and the run weight absorbs
/// the thinning ratio, so `mean_count` stays unbiased.
pub fn two_barrier_census(
    law: &OffspringLaw,
    cfg: &CensusConfig,
    key: StreamKey,
    exec: Execution,
) -> Result<Vec<CensusRecord>> {
    let sigma_sq = critical_sigma_sq(law)?;
    let a_c = a_critical(sigma_sq)?;
    if !(cfg.a > a_c) {
        return Err(Error::domain(format!("census needs a > a_c = {a_c}, got {}", cfg.a)));
    }
    let b = match cfg.b {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => return Err(Error::domain(format!("corridor width b = {b} must be positive"))),
        None => b_roots(sigma_sq, cfg.a)?.b_a().expect("a > a_c has two roots"),
    };
    if cfg.growth < 2 || cfg.runs < 2 {
        return Err(Error::domain("census needs E ≥ 2 and runs ≥ 2"));
    }
    if cfg.growth.checked_pow(cfg.k_max).is_none() {
        return Err(Error::domain("E^k_max overflows"));
    }
    // k = 0 is the ancestor itself, at generation 0.
    let checkpoints: Vec<u64> = (0..=cfg.k_max).map(|k| if k == 0 { 0 } else { cfg.growth.pow(k) }).collect();
    let (a, lower) = (cfg.a, cfg.a - b);
    let killed = move |i: u64, v: f64| {
        let s = (i as f64).cbrt();
        v > a * s || v < lower * s
    };
    let sampler = law.sampler();
    let cap = cfg.cap.unwrap_or(usize::MAX).max(1);
    let per_run: Vec<Vec<f64>> = map_indices(exec, cfg.runs, |r| {
        let mut cloud = Cloud::root(key.child(r));
        let mut counts = Vec::with_capacity(checkpoints.len());
        for &nk in &checkpoints {
            cloud.run_to(&sampler, &killed, nk, cap, true);
            counts.push(cloud.weight * cloud.positions.len() as f64);
        }
        counts
    });
    let m = law.mean_children();
    let runs = cfg.runs as f64;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(k, &nk)| {
            let mean = per_run.iter().map(|c| c[k]).collect::<CompensatedSum>().value() / runs;
            let var = per_run.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (runs - 1.0);
            let exp_target = ((nk as f64).cbrt() * (b - cfg.eps)).exp();
            CensusRecord {
                k: k as u32,
                n_k: nk,
                mean_count: mean,
                stderr: (var / runs).sqrt(),
                exp_target,
                unconstrained_mean: m.powf(nk as f64),
                meets_target: mean >= exp_target,
            }
        })
        .collect())
}
