//! The spine random walk and tube probabilities.
//!
//! A critical law induces the step law `E[f(X)] = E[Σ e^{-ξ} f(ξ)]`. Tubes
//! constrain the walk at integer times `i ≤ j` between two profiles evaluated
//! at `i/j`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::SurvivalEstimate;
use crate::exec::{map_batches, Execution};
use crate::laws::{LaplaceProfile, OffspringLaw, Outcome};
use crate::numeric::{integrate, CompensatedSum};
use crate::rng::StreamKey;

/// Runs per independently seeded batch.
pub const MC_BATCH: u64 = 4096;
/// Largest number of (state, particle) leaves enumerated by [`many_to_one_check`].
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TiltedStepLaw {
    /// `(x, p)` pairs sorted by `x`.
    DiscreteAtoms {
        atoms: Vec<(f64, f64)>,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
}

impl TiltedStepLaw {
    pub fn mean(&self) -> f64 {
        match self {
            TiltedStepLaw::DiscreteAtoms { atoms } => atoms.iter().map(|(x, p)| x * p).sum(),
            TiltedStepLaw::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            TiltedStepLaw::DiscreteAtoms { atoms } => {
                let m = self.mean();
                atoms.iter().map(|(x, p)| p * (x - m) * (x - m)).sum()
            }
            TiltedStepLaw::Gaussian { variance, .. } => *variance,
        }
    }

    pub fn sampler(&self) -> StepSampler {
        match self {
            TiltedStepLaw::DiscreteAtoms { atoms } => {
                let mut acc = 0.0;
                let cumulative = atoms
                    .iter()
                    .map(|(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                StepSampler::Atoms { xs: atoms.iter().map(|a| a.0).collect(), cumulative }
            }
            TiltedStepLaw::Gaussian { mean, variance } => StepSampler::Gaussian { mean: *mean, sd: variance.sqrt() },
        }
    }
}

#[derive(Clone, Debug)]
pub enum StepSampler {
    Atoms { xs: Vec<f64>, cumulative: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
}

impl StepSampler {
    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            StepSampler::Atoms { xs, cumulative } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let idx = cumulative.iter().position(|&c| u < c).unwrap_or(xs.len() - 1);
                xs[idx]
            }
            StepSampler::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }
}

/// The step law of the walk seen along the spine.
pub fn tilted_step(law: &OffspringLaw) -> Result<TiltedStepLaw> {
    let phi1 = LaplaceProfile::from_law(law).phi(1.0, 0)?;
    if (phi1 - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("Φ(1) = {phi1} ≠ 1")));
    }
    Ok(match law {
        OffspringLaw::FiniteSupport { outcomes } => {
            let mut atoms: Vec<(f64, f64)> = Vec::new();
            for o in outcomes {
                for &x in &o.displacements {
                    let w = o.prob * (-x).exp();
                    match atoms.iter_mut().find(|a| a.0 == x) {
                        Some(a) => a.1 += w,
                        None => atoms.push((x, w)),
                    }
                }
            }
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            TiltedStepLaw::DiscreteAtoms { atoms }
        }
        // m N(mu, s0sq)(x) e^{-x} is proportional to N(mu - s0sq, s0sq)(x).
        OffspringLaw::PoissonGaussian { mu, s0sq, .. } => TiltedStepLaw::Gaussian { mean: mu - s0sq, variance: *s0sq },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `coeff · (t + offset)^{1/3}`
    CubeRootOffset {
        coeff: f64,
        offset: f64,
    },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::CubeRootOffset { coeff, offset } => coeff * (t + offset).cbrt(),
        }
    }
}

/// Units in which the profiles bound the walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TubeScale {
    /// Bounds on `S_i / j^{1/3}`.
    #[default]
    CubeRoot,
    /// Bounds on `S_i` itself, so integer bands stay exact.
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeSpec {
    pub j: u64,
    pub lower: Profile,
    pub upper: Profile,
    /// Window on `S_j / j^{1/3}`.
    pub endpoint_window: Option<(f64, f64)>,
    pub scale: TubeScale,
    /// Allow `lower = upper` at grid points.
    pub relaxed: bool,
}

impl TubeSpec {
    pub fn scaled(j: u64, lower: Profile, upper: Profile) -> Self {
        TubeSpec { j, lower, upper, endpoint_window: None, scale: TubeScale::CubeRoot, relaxed: false }
    }

    pub fn absolute(j: u64, lower: f64, upper: f64) -> Self {
        TubeSpec {
            j,
            lower: Profile::Constant { value: lower },
            upper: Profile::Constant { value: upper },
            endpoint_window: None,
            scale: TubeScale::Absolute,
            relaxed: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::domain("tube needs j ≥ 1"));
        }
        if !(self.lower.eval(0.0) <= 0.0 && 0.0 <= self.upper.eval(0.0)) {
            return Err(Error::domain("tube must contain the origin at t = 0"));
        }
        for i in 0..=self.j {
            let t = i as f64 / self.j as f64;
            let (lo, hi) = (self.lower.eval(t), self.upper.eval(t));
            let ok = if self.relaxed { lo <= hi } else { lo < hi };
            if !ok || lo.is_nan() || hi.is_nan() {
                return Err(Error::domain(format!("lower ≥ upper at t = {t}")));
            }
        }
        if let Some((lo, hi)) = self.endpoint_window {
            if !(lo <= hi) {
                return Err(Error::domain("endpoint window is empty"));
            }
        }
        Ok(())
    }

    /// Absolute bounds for `S_i`, `i = 1..=j`.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let scale = match self.scale {
            TubeScale::CubeRoot => (self.j as f64).cbrt(),
            TubeScale::Absolute => 1.0,
        };
        (1..=self.j)
            .map(|i| {
                let t = i as f64 / self.j as f64;
                (self.lower.eval(t) * scale, self.upper.eval(t) * scale)
            })
            .unzip()
    }
}

/// Outcome of one walk: `Ok(())` if it stayed inside, else the exit step
/// (`j + 1` when only the endpoint window was missed).
fn run_walk<R: Rng>(
    sampler: &StepSampler,
    lo: &[f64],
    hi: &[f64],
    end: Option<(f64, f64)>,
    rng: &mut R,
) -> Option<usize> {
    let mut s = 0.0;
    for i in 0..lo.len() {
        s += sampler.sample(rng);
        if s < lo[i] || s > hi[i] {
            return Some(i + 1);
        }
    }
    if let Some((a, b)) = end {
        let x = s / (lo.len() as f64).cbrt();
        if x < a || x > b {
            return Some(lo.len() + 1);
        }
    }
    None
}

fn tube_batches(
    step: &TiltedStepLaw,
    spec: &TubeSpec,
    runs: u64,
    key: StreamKey,
    exec: Execution,
) -> Result<Vec<Vec<u64>>> {
    spec.validate()?;
    if runs == 0 {
        return Err(Error::domain("runs must be ≥ 1"));
    }
    let sampler = step.sampler();
    let (lo, hi) = spec.bounds();
    let len = spec.j as usize + 2;
    Ok(map_batches(exec, runs, MC_BATCH, |b, a, z| {
        let mut rng = key.child(b).stream();
        let mut hist = vec![0u64; len];
        for _ in a..z {
            match run_walk(&sampler, &lo, &hi, spec.endpoint_window, &mut rng) {
                None => hist[0] += 1,
                Some(i) => hist[i] += 1,
            }
        }
        hist
    }))
}

/// Fraction of walks that stay inside the tube (and end in the window).
pub fn tube_probability_mc(
    step: &TiltedStepLaw,
    spec: &TubeSpec,
    runs: u64,
    key: StreamKey,
    exec: Execution,
) -> Result<SurvivalEstimate> {
    let hits = tube_batches(step, spec, runs, key, exec)?.iter().map(|h| h[0]).sum();
    Ok(SurvivalEstimate::binomial(spec.j, hits, runs, 0))
}

/// Counts by exit step: index 0 holds walks that stayed inside, index
/// `i ∈ 1..=j` exits at step `i`, index `j + 1` endpoint-window misses.
pub fn tube_exit_histogram(
    step: &TiltedStepLaw,
    spec: &TubeSpec,
    runs: u64,
    key: StreamKey,
    exec: Execution,
) -> Result<Vec<u64>> {
    let parts = tube_batches(step, spec, runs, key, exec)?;
    let mut total = vec![0u64; spec.j as usize + 2];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

/// `(π²σ²/2) ∫_0^1 dt / (upper(t) - lower(t))²`, `+∞` if the tube pinches.
pub fn mogulskii_rate(sigma_sq: f64, spec: &TubeSpec) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::domain("σ² must be positive"));
    }
    let pref = std::f64::consts::PI.powi(2) * sigma_sq / 2.0;
    match (spec.lower, spec.upper) {
        (Profile::Constant { value: l }, Profile::Constant { value: u }) => {
            let w = u - l;
            if w < 0.0 {
                return Err(Error::domain("upper below lower"));
            }
            return Ok(if w == 0.0 { f64::INFINITY } else { pref / (w * w) });
        }
        (Profile::CubeRootOffset { coeff: cl, offset: dl }, Profile::CubeRootOffset { coeff: cu, offset: du })
            if dl == du =>
        {
            let b = cu - cl;
            if b < 0.0 || dl < 0.0 {
                return Err(Error::domain("malformed cube-root tube"));
            }
            if b == 0.0 {
                return Ok(f64::INFINITY);
            }
            return Ok(pref * 3.0 / (b * b) * ((1.0 + dl).cbrt() - dl.cbrt()));
        }
        (Profile::Constant { value }, Profile::CubeRootOffset { coeff, offset: 0.0 })
        | (Profile::CubeRootOffset { coeff, offset: 0.0 }, Profile::Constant { value })
            if value == 0.0 =>
        {
            if coeff == 0.0 {
                return Ok(f64::INFINITY);
            }
            return Ok(pref * 3.0 / (coeff * coeff));
        }
        _ => {}
    }
    let width = |t: f64| spec.upper.eval(t) - spec.lower.eval(t);
    for i in 0..=1000 {
        let w = width(i as f64 / 1000.0);
        if w < 0.0 {
            return Err(Error::domain("upper below lower"));
        }
        if w == 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(pref * integrate(|t| width(t).powi(-2), 0.0, 1.0, 1e-10, 0.0)?)
}

/// Probability that a lattice walk started at `start` stays in `band` for `j` steps.
pub fn tube_probability_exact(step: &TiltedStepLaw, j: u64, band: (i64, i64), start: i64) -> Result<f64> {
    let TiltedStepLaw::DiscreteAtoms { atoms } = step else {
        return Err(Error::UnsupportedLaw("exact tube oracle needs integer atoms".into()));
    };
    let mut int_atoms = Vec::with_capacity(atoms.len());
    for &(x, p) in atoms {
        if x.fract() != 0.0 || !x.is_finite() {
            return Err(Error::UnsupportedLaw(format!("atom {x} is not an integer")));
        }
        int_atoms.push((x as i64, p));
    }
    let (lo, hi) = band;
    if hi < lo || hi - lo + 1 > 10_000 {
        return Err(Error::domain("band must be non-empty with at most 10⁴ sites"));
    }
    if j > 1_000_000 {
        return Err(Error::domain("j ≤ 10⁶ required"));
    }
    if start < lo || start > hi {
        return Ok(0.0);
    }
    let width = (hi - lo + 1) as usize;
    let mut dist = vec![0.0; width];
    dist[(start - lo) as usize] = 1.0;
    let mut acc = vec![CompensatedSum::default(); width];
    for _ in 0..j {
        for a in acc.iter_mut() {
            *a = CompensatedSum::default();
        }
        for (y, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(x, p) in &int_atoms {
                let z = y as i64 + x;
                if z >= 0 && (z as usize) < width {
                    acc[z as usize].add(mass * p);
                }
            }
        }
        for (d, a) in dist.iter_mut().zip(&acc) {
            *d = a.value();
        }
    }
    Ok(dist.iter().copied().collect::<CompensatedSum>().value())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Functional {
    One,
    /// `1{S_n ≤ 0}`
    IndicatorBelowZeroAtN,
    /// `1{|S_i| ≤ w for all i ≤ n}`
    IndicatorTubeConstant {
        w: f64,
    },
}

impl Functional {
    fn eval(&self, path: &[f64]) -> f64 {
        let ok = match *self {
            Functional::One => true,
            Functional::IndicatorBelowZeroAtN => *path.last().expect("non-empty path") <= 0.0,
            Functional::IndicatorTubeConstant { w } => path.iter().all(|s| s.abs() <= w),
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ManyToOne {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
}

/// Compares `E[Σ_{|u|=n} e^{-V(u)} F(V(u_1), ..., V(u_n))]`, enumerated over
/// every realisation of the first `n` generations, with `E[F(S_1, ..., S_n)]`
/// enumerated over the tilted walk's paths.
pub fn many_to_one_check(law: &OffspringLaw, n: usize, functional: Functional) -> Result<ManyToOne> {
    let OffspringLaw::FiniteSupport { outcomes } = law else {
        return Err(Error::UnsupportedLaw("many-to-one enumeration needs a finite law".into()));
    };
    if n == 0 || n > 6 {
        return Err(Error::domain("n must lie in 1..=6"));
    }
    let step = tilted_step(law)?;

    // A realisation: its probability and the ancestral paths of the living generation.
    let mut states: Vec<(f64, Vec<Vec<f64>>)> = vec![(1.0, vec![Vec::new()])];
    for _ in 0..n {
        let mut next = Vec::new();
        let mut leaves = 0u64;
        for (prob, paths) in &states {
            expand(outcomes, paths, 0, *prob, &mut Vec::new(), &mut next, &mut leaves)?;
        }
        states = next;
    }
    let mut lhs = CompensatedSum::default();
    for (prob, paths) in &states {
        for path in paths {
            let v = *path.last().expect("depth ≥ 1");
            lhs.add(prob * (-v).exp() * functional.eval(path));
        }
    }

    let TiltedStepLaw::DiscreteAtoms { atoms } = step else { unreachable!("finite law tilts to atoms") };
    let mut rhs = CompensatedSum::default();
    let mut path = Vec::with_capacity(n);
    walk_paths(&atoms, n, 1.0, 0.0, &mut path, &functional, &mut rhs);

    let (lhs, rhs) = (lhs.value(), rhs.value());
    Ok(ManyToOne { lhs, rhs, abs_diff: (lhs - rhs).abs() })
}

fn expand(
    outcomes: &[Outcome],
    parents: &[Vec<f64>],
    idx: usize,
    prob: f64,
    children: &mut Vec<Vec<f64>>,
    out: &mut Vec<(f64, Vec<Vec<f64>>)>,
    leaves: &mut u64,
) -> Result<()> {
    if idx == parents.len() {
        *leaves += children.len().max(1) as u64;
        if *leaves > ENUMERATION_LIMIT {
            return Err(Error::SizeLimit { limit: ENUMERATION_LIMIT });
        }
        out.push((prob, children.clone()));
        return Ok(());
    }
    let parent = &parents[idx];
    let base = parent.last().copied().unwrap_or(0.0);
    for o in outcomes {
        let before = children.len();
        for &x in &o.displacements {
            let mut p = parent.clone();
            p.push(base + x);
            children.push(p);
        }
        expand(outcomes, parents, idx + 1, prob * o.prob, children, out, leaves)?;
        children.truncate(before);
    }
    Ok(())
}

fn walk_paths(
    atoms: &[(f64, f64)],
    n: usize,
    prob: f64,
    s: f64,
    path: &mut Vec<f64>,
    f: &Functional,
    acc: &mut CompensatedSum,
) {
    if path.len() == n {
        acc.add(prob * f.eval(path));
        return;
    }
    for &(x, p) in atoms {
        path.push(s + x);
        walk_paths(atoms, n, prob * p, s + x, path, f, acc);
        path.pop();
    }
}
