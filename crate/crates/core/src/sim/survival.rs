use rand::Rng;
use serde::{Deserialize, Serialize};

use super::barrier::Barrier;
use super::population::Cloud;
use crate::error::{Error, Result};
use crate::estimate::{Method, SurvivalEstimate};
use crate::exec::{map_indices, Execution};
use crate::laws::OffspringLaw;
use crate::rng::StreamKey;

pub const MIN_RUNS: u64 = 100;
pub const MIN_NAIVE_HITS: u64 = 10;
/// Survivor cap for runs where only the alive/extinct indicator matters.
pub const DEFAULT_SURVIVAL_CAP: usize = 1_000_000;

/// Fixed-effort multilevel splitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplittingConfig {
    /// Explicit milestone generations; empty means geometric from `start` by `ratio`.
    pub milestones: Vec<u64>,
    pub start: u64,
    pub ratio: f64,
    /// Independent replicate groups; the stderr is taken between groups.
    pub groups: u64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig { milestones: Vec::new(), start: 4, ratio: 2.0, groups: 20 }
    }
}

impl SplittingConfig {
    pub fn milestones_for(&self, n: u64) -> Result<Vec<u64>> {
        if self.milestones.is_empty() {
            return geometric_milestones(n, self.start, self.ratio);
        }
        let mut m: Vec<u64> = self.milestones.iter().copied().filter(|&g| g >= 1 && g < n).collect();
        m.sort_unstable();
        m.dedup();
        m.push(n);
        Ok(m)
    }
}

/// `round(start · ratio^k)` below `n`, then `n`.
pub fn geometric_milestones(n: u64, start: u64, ratio: f64) -> Result<Vec<u64>> {
    if start == 0 || !(ratio > 1.0) {
        return Err(Error::domain("milestones need start ≥ 1 and ratio > 1"));
    }
    let mut out = Vec::new();
    let mut x = start as f64;
    loop {
        let g = x.round() as u64;
        if g >= n {
            break;
        }
        if out.last() != Some(&g) {
            out.push(g);
        }
        x *= ratio;
    }
    out.push(n);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SurvivalMethod {
    Naive,
    Splitting(SplittingConfig),
}

/// `P(the killed process is alive at generation n)`.
#[allow(clippy::too_many_arguments)]
pub fn survival_probability(
    law: &OffspringLaw,
    barrier: &Barrier,
    n: u64,
    runs: u64,
    method: &SurvivalMethod,
    cap: usize,
    key: StreamKey,
    exec: Execution,
) -> Result<SurvivalEstimate> {
    barrier.validate()?;
    if runs < MIN_RUNS {
        return Err(Error::domain(format!("runs = {runs} < {MIN_RUNS}")));
    }
    if cap == 0 {
        return Err(Error::domain("cap must be ≥ 1"));
    }
    let sampler = law.sampler();
    let killed = |i: u64, v: f64| v > barrier.phi(i);
    match method {
        SurvivalMethod::Naive => {
            let outcomes = map_indices(exec, runs, |r| {
                let mut cloud = Cloud::root(key.child(r));
                cloud.run_to(&sampler, &killed, n, cap, false);
                (!cloud.is_extinct(), cloud.truncated)
            });
            let hits = outcomes.iter().filter(|o| o.0).count() as u64;
            let cap_hits = outcomes.iter().filter(|o| o.1).count() as u64;
            if hits < MIN_NAIVE_HITS {
                return Err(Error::InsufficientHits { hits, needed: MIN_NAIVE_HITS });
            }
            Ok(SurvivalEstimate::binomial(n, hits, runs, cap_hits))
        }
        SurvivalMethod::Splitting(cfg) => {
            let milestones = cfg.milestones_for(n)?;
            let groups = cfg.groups.clamp(2, runs / 2);
            let per_group = runs / groups;
            let results = map_indices(exec, groups, |g| {
                split_group(&sampler, &killed, &milestones, per_group as usize, cap, key.child(g), exec)
            });
            let estimates: Vec<f64> = results.iter().map(|r| r.0).collect();
            let cap_hits = results.iter().map(|r| r.1).sum();
            let mean = estimates.iter().sum::<f64>() / groups as f64;
            let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (groups - 1) as f64;
            Ok(SurvivalEstimate {
                n,
                p_hat: mean,
                stderr: (var / groups as f64).sqrt(),
                runs: groups * per_group,
                method: Method::Splitting,
                cap_hits,
            })
        }
    }
}

/// One fixed-effort group of `r` replicates. Returns `Π s_k / r` and the
/// number of final replicates that hit the cap.
fn split_group<K: Fn(u64, f64) -> bool + Sync>(
    sampler: &crate::laws::LawSampler,
    killed: &K,
    milestones: &[u64],
    r: usize,
    cap: usize,
    key: StreamKey,
    exec: Execution,
) -> (f64, u64) {
    let mut resample_rng = key.domain("resample").stream();
    let mut clouds: Vec<Cloud> = (0..r).map(|_| Cloud::root(key)).collect();
    let mut estimate = 1.0;
    for (level, &target) in milestones.iter().enumerate() {
        let level_key = key.child(level as u64);
        clouds = map_indices(exec, r as u64, |slot| {
            let mut c = clouds[slot as usize].clone();
            c.salt = level_key.child(slot).0;
            c.run_to(sampler, killed, target, cap, false);
            c
        });
        let alive: Vec<usize> = (0..r).filter(|&j| !clouds[j].is_extinct()).collect();
        if alive.is_empty() {
            return (0.0, 0);
        }
        estimate *= alive.len() as f64 / r as f64;
        if level + 1 < milestones.len() {
            // Systematic resampling: survivor i gets r/s copies in expectation.
            let u: f64 = resample_rng.random();
            let s = alive.len() as f64;
            clouds = (0..r)
                .map(|j| clouds[alive[(((j as f64 + u) * s / r as f64) as usize).min(alive.len() - 1)]].clone())
                .collect();
        } else {
            let cap_hits = alive.iter().filter(|&&j| clouds[j].truncated).count() as u64;
            return (estimate, cap_hits);
        }
    }
    (estimate, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub a: f64,
    pub estimate: SurvivalEstimate,
}

/// Naive survival probabilities at every `a` in `a_grid` for `PowerLaw{a}`
/// barriers, from one shared set of runs.
///
/// Each run simulates the tree once, killed above `max(a_grid)·i^{1/3}`,
/// and tracks for every particle the smallest `a` its ancestral line
/// tolerates. A run survives at `a` iff some particle at `n` needs at most
/// `a`, so the curve is monotone in `a` by construction. The cap keeps the
/// particles with the smallest requirement.
pub fn survival_curve(
    law: &OffspringLaw,
    a_grid: &[f64],
    n: u64,
    runs: u64,
    cap: usize,
    key: StreamKey,
    exec: Execution,
) -> Result<Vec<SurvivalPoint>> {
    if a_grid.is_empty() || a_grid.iter().any(|a| !a.is_finite()) {
        return Err(Error::domain("a_grid must be non-empty and finite"));
    }
    if runs < MIN_RUNS || cap == 0 || n == 0 {
        return Err(Error::domain(format!("need runs ≥ {MIN_RUNS}, cap ≥ 1, n ≥ 1")));
    }
    let a_max = a_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sampler = law.sampler();
    let runs_out = map_indices(exec, runs, |r| sweep_run(&sampler, a_max, n, cap, key.child(r)));
    Ok(a_grid
        .iter()
        .map(|&a| {
            let hits = runs_out.iter().filter(|o| o.0 <= a).count() as u64;
            let cap_hits = runs_out.iter().filter(|o| o.1 && o.0 <= a).count() as u64;
            SurvivalPoint { a, estimate: SurvivalEstimate::binomial(n, hits, runs, cap_hits) }
        })
        .collect())
}

/// Smallest tolerated `a` among generation-`n` particles (`+∞` if extinct
/// under `a_max`) and whether the cap was engaged.
fn sweep_run(sampler: &crate::laws::LawSampler, a_max: f64, n: u64, cap: usize, key: StreamKey) -> (f64, bool) {
    let mut rng = key.stream();
    let mut cur: Vec<(f64, f64)> = vec![(0.0, f64::NEG_INFINITY)];
    let mut next = Vec::new();
    let mut buf = Vec::new();
    let mut truncated = false;
    for i in 1..=n {
        let scale = (i as f64).cbrt();
        next.clear();
        for &(x, need) in &cur {
            buf.clear();
            sampler.sample_into(&mut rng, &mut buf);
            for &d in &buf {
                let v = x + d;
                if v > a_max * scale {
                    continue;
                }
                next.push((v, need.max(v / scale)));
            }
        }
        if next.is_empty() {
            return (f64::INFINITY, truncated);
        }
        if next.len() > cap {
            next.select_nth_unstable_by(cap - 1, |p, q| p.1.total_cmp(&q.1).then(p.0.total_cmp(&q.0)));
            next.truncate(cap);
            truncated = true;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    (cur.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), truncated)
}
