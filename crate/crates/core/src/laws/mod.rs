//! Reproduction laws and their Laplace transforms.
//!
//! A law is a point process: one draw gives the full sibling set of one
//! individual, as a list of displacements relative to the parent. The
//! transform uses the weight `e^{-t x}` throughout,
//! `Φ(t) = E[Σ e^{-t ξ}]`, `Ψ = log Φ`, and `σ² = Φ''(1)`.

mod closed_form;

pub use closed_form::{ClosedFormTransform, ExpTail, HarmonicTail};

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Tolerance on the total probability of a finite law.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Default tolerance of [`criticality_check`] for closed-form laws.
pub const CRITICALITY_TOL: f64 = 1e-9;

/// One possible sibling set, drawn with probability `prob`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub prob: f64,
    pub displacements: Vec<f64>,
}

impl Outcome {
    pub fn new(prob: f64, displacements: impl Into<Vec<f64>>) -> Self {
        Outcome { prob, displacements: displacements.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OffspringLaw {
    /// Finitely many joint sibling sets (correlated siblings allowed).
    FiniteSupport { outcomes: Vec<Outcome> },
    /// Poisson(m) children with i.i.d. N(mu, s0sq) displacements.
    PoissonGaussian { m: f64, mu: f64, s0sq: f64 },
}

impl OffspringLaw {
    pub fn finite(outcomes: Vec<Outcome>) -> Result<Self> {
        let law = OffspringLaw::FiniteSupport { outcomes };
        law.validate()?;
        Ok(law)
    }

    pub fn poisson_gaussian(m: f64, mu: f64, s0sq: f64) -> Result<Self> {
        let law = OffspringLaw::PoissonGaussian { m, mu, s0sq };
        law.validate()?;
        Ok(law)
    }

    /// The critical Gaussian law with `σ² = s0sq`: `m = e^{s0sq/2}`, `mu = s0sq`.
    pub fn critical_gaussian(sigma_sq: f64) -> Result<Self> {
        Self::poisson_gaussian((sigma_sq / 2.0).exp(), sigma_sq, sigma_sq)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::FiniteSupport { outcomes } => {
                if outcomes.is_empty() {
                    return Err(Error::domain("finite law needs at least one outcome"));
                }
                let mut total = 0.0;
                for (i, o) in outcomes.iter().enumerate() {
                    if !(o.prob > 0.0 && o.prob <= 1.0) {
                        return Err(Error::domain(format!("outcome {i}: probability {} not in (0, 1]", o.prob)));
                    }
                    if o.displacements.iter().any(|x| !x.is_finite()) {
                        return Err(Error::domain(format!("outcome {i}: non-finite displacement")));
                    }
                    total += o.prob;
                }
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
                }
                if outcomes.iter().all(|o| o.displacements.is_empty()) {
                    return Err(Error::domain("law never produces children"));
                }
                Ok(())
            }
            OffspringLaw::PoissonGaussian { m, mu, s0sq } => {
                if !(*m > 0.0 && m.is_finite()) {
                    return Err(Error::domain(format!("mean children m = {m} must be positive")));
                }
                if !mu.is_finite() {
                    return Err(Error::domain("displacement mean must be finite"));
                }
                if !(*s0sq > 0.0 && s0sq.is_finite()) {
                    return Err(Error::domain(format!("displacement variance {s0sq} must be positive")));
                }
                Ok(())
            }
        }
    }

    /// Expected number of children, `Φ(0)`.
    pub fn mean_children(&self) -> f64 {
        match self {
            OffspringLaw::FiniteSupport { outcomes } => {
                outcomes.iter().map(|o| o.prob * o.displacements.len() as f64).sum()
            }
            OffspringLaw::PoissonGaussian { m, .. } => *m,
        }
    }

    pub fn has_negative_steps(&self) -> bool {
        match self {
            OffspringLaw::FiniteSupport { outcomes } => {
                outcomes.iter().any(|o| o.displacements.iter().any(|&x| x < 0.0))
            }
            OffspringLaw::PoissonGaussian { .. } => true,
        }
    }

    /// Flag for laws whose plain Galton–Watson tree is not supercritical.
    pub fn subcritical_population(&self) -> bool {
        self.mean_children() <= 1.0
    }

    pub fn sampler(&self) -> LawSampler {
        match self {
            OffspringLaw::FiniteSupport { outcomes } => {
                let mut acc = 0.0;
                let cumulative = outcomes
                    .iter()
                    .map(|o| {
                        acc += o.prob;
                        acc
                    })
                    .collect();
                LawSampler::Finite { cumulative, outcomes: outcomes.clone() }
            }
            OffspringLaw::PoissonGaussian { m, mu, s0sq } => LawSampler::PoissonGaussian {
                poisson: Poisson::new(*m).expect("validated mean"),
                mu: *mu,
                sd: s0sq.sqrt(),
            },
        }
    }
}

/// Precomputed sampler for one law.
#[derive(Clone, Debug)]
pub enum LawSampler {
    Finite { cumulative: Vec<f64>, outcomes: Vec<Outcome> },
    PoissonGaussian { poisson: Poisson<f64>, mu: f64, sd: f64 },
}

impl LawSampler {
    /// Appends one sibling set to `out`.
    #[inline]
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            LawSampler::Finite { cumulative, outcomes } => {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let idx = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
                out.extend_from_slice(&outcomes[idx].displacements);
            }
            LawSampler::PoissonGaussian { poisson, mu, sd } => {
                let k = poisson.sample(rng) as usize;
                for _ in 0..k {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(mu + sd * z);
                }
            }
        }
    }
}

/// Draws one sibling set.
pub fn sample_offspring(law: &OffspringLaw, stream: &mut RandomStream) -> Vec<f64> {
    let mut out = Vec::new();
    law.sampler().sample_into(stream, &mut out);
    out
}

/// The outcomes of a finite law, exactly as configured.
pub fn enumerate_outcomes(law: &OffspringLaw) -> Result<Vec<Outcome>> {
    match law {
        OffspringLaw::FiniteSupport { outcomes } => Ok(outcomes.clone()),
        OffspringLaw::PoissonGaussian { .. } => {
            Err(Error::UnsupportedLaw("Poisson-Gaussian law has no finite enumeration".into()))
        }
    }
}

#[derive(Clone)]
enum Source {
    Law(OffspringLaw),
    Closed(Arc<dyn ClosedFormTransform>),
}

/// The transform `Φ` of a law's intensity measure together with its
/// abscissa of convergence `ζ` and the bottom of the support.
#[derive(Clone)]
pub struct LaplaceProfile {
    source: Source,
    zeta: f64,
    x_min: f64,
    mass_at_xmin: f64,
}

impl fmt::Debug for LaplaceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            Source::Law(l) => format!("{l:?}"),
            Source::Closed(c) => c.name().to_string(),
        };
        f.debug_struct("LaplaceProfile")
            .field("source", &src)
            .field("zeta", &self.zeta)
            .field("x_min", &self.x_min)
            .field("mass_at_xmin", &self.mass_at_xmin)
            .finish()
    }
}

impl LaplaceProfile {
    pub fn from_law(law: &OffspringLaw) -> Self {
        let (x_min, mass) = match law {
            OffspringLaw::FiniteSupport { outcomes } => {
                let x_min = outcomes.iter().flat_map(|o| o.displacements.iter().copied()).fold(f64::INFINITY, f64::min);
                let mass = outcomes
                    .iter()
                    .map(|o| o.prob * o.displacements.iter().filter(|&&x| x == x_min).count() as f64)
                    .sum();
                (x_min, mass)
            }
            OffspringLaw::PoissonGaussian { .. } => (f64::NEG_INFINITY, 0.0),
        };
        LaplaceProfile { source: Source::Law(law.clone()), zeta: f64::INFINITY, x_min, mass_at_xmin: mass }
    }

    pub fn from_closed_form(transform: Arc<dyn ClosedFormTransform>) -> Self {
        LaplaceProfile {
            zeta: transform.zeta(),
            x_min: transform.x_min(),
            mass_at_xmin: transform.mass_at_xmin(),
            source: Source::Closed(transform),
        }
    }

    pub fn law(&self) -> Option<&OffspringLaw> {
        match &self.source {
            Source::Law(l) => Some(l),
            Source::Closed(_) => None,
        }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn mass_at_xmin(&self) -> f64 {
        self.mass_at_xmin
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t > self.zeta || (t == self.zeta && self.zeta.is_infinite()) {
            return Err(Error::domain(format!("t = {t} outside [0, ζ = {}]", self.zeta)));
        }
        Ok(())
    }

    /// `Φ^{(order)}(t)` for `order ∈ {0, 1, 2}`. At `t = ζ < ∞` the value may be `+∞`.
    pub fn phi(&self, t: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::domain(format!("derivative order {order} not supported")));
        }
        self.check_domain(t)?;
        Ok(match &self.source {
            Source::Law(OffspringLaw::FiniteSupport { outcomes }) => outcomes
                .iter()
                .flat_map(|o| o.displacements.iter().map(move |&x| o.prob * (-x).powi(order as i32) * (-t * x).exp()))
                .sum(),
            Source::Law(OffspringLaw::PoissonGaussian { m, mu, s0sq }) => {
                let psi = m.ln() - t * mu + 0.5 * t * t * s0sq;
                let dpsi = -mu + t * s0sq;
                let phi = psi.exp();
                match order {
                    0 => phi,
                    1 => dpsi * phi,
                    _ => (s0sq + dpsi * dpsi) * phi,
                }
            }
            Source::Closed(c) => c.phi(t, order),
        })
    }

    /// `(Ψ, Ψ', Ψ'')` at `t`, evaluated in log space where possible.
    pub fn psi_derivatives(&self, t: f64) -> Result<(f64, f64, f64)> {
        self.check_domain(t)?;
        match &self.source {
            Source::Law(OffspringLaw::FiniteSupport { outcomes }) => {
                let shift = outcomes
                    .iter()
                    .flat_map(|o| o.displacements.iter())
                    .map(|&x| -t * x)
                    .fold(f64::NEG_INFINITY, f64::max);
                let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for o in outcomes {
                    for &x in &o.displacements {
                        let w = o.prob * (-t * x - shift).exp();
                        s0 += w;
                        s1 -= w * x;
                        s2 += w * x * x;
                    }
                }
                let d1 = s1 / s0;
                Ok((shift + s0.ln(), d1, s2 / s0 - d1 * d1))
            }
            Source::Law(OffspringLaw::PoissonGaussian { m, mu, s0sq }) => {
                Ok((m.ln() - t * mu + 0.5 * t * t * s0sq, -mu + t * s0sq, *s0sq))
            }
            Source::Closed(_) => {
                let p0 = self.phi(t, 0)?;
                let p1 = self.phi(t, 1)?;
                let p2 = self.phi(t, 2)?;
                let d1 = p1 / p0;
                Ok((p0.ln(), d1, p2 / p0 - d1 * d1))
            }
        }
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        Ok(self.psi_derivatives(t)?.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalityReport {
    pub is_critical: bool,
    pub psi1: f64,
    pub dpsi1: f64,
    /// `Φ''(1)`; this is `σ²` only when the law is critical.
    pub sigma_sq: f64,
}

/// Checks `Ψ(1) = 0` and `Ψ'(1) = 0` to within `tol`.
pub fn criticality_check(profile: &LaplaceProfile, tol: f64) -> Result<CriticalityReport> {
    if profile.zeta() <= 1.0 {
        return Err(Error::domain(format!("ζ = {} ≤ 1, Φ(1) undefined", profile.zeta())));
    }
    let (psi1, dpsi1, _) = profile.psi_derivatives(1.0)?;
    let sigma_sq = profile.phi(1.0, 2)?;
    Ok(CriticalityReport { is_critical: psi1.abs() <= tol && dpsi1.abs() <= tol, psi1, dpsi1, sigma_sq })
}

/// Convenience: checks that `law` is critical and returns its `σ²`.
pub fn critical_sigma_sq(law: &OffspringLaw) -> Result<f64> {
    let rep = criticality_check(&LaplaceProfile::from_law(law), CRITICALITY_TOL)?;
    if !rep.is_critical {
        return Err(Error::domain(format!("law is not critical: Ψ(1) = {:.3e}, Ψ'(1) = {:.3e}", rep.psi1, rep.dpsi1)));
    }
    Ok(rep.sigma_sq)
}
