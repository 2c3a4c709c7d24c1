//! Exponential tilting of a non-critical law onto the critical case.
//!
//! With `G(t) = tΨ'(t) - Ψ(t)`, a root `t* > 0` of `G` makes the law of
//! `t* ξ + Ψ(t*)` critical. `G` is nondecreasing and `G(0) = -Ψ(0)`, so a
//! root in `(0, ζ]` can only exist when `Φ(0) > 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::laws::{LaplaceProfile, OffspringLaw, Outcome};
use crate::numeric::bisect;

/// Relative tolerance on `G(t*)`.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    #[serde(rename = "ZetaInf_Reducible")]
    ZetaInfReducible,
    #[serde(rename = "ZetaInf_Irreducible")]
    ZetaInfIrreducible,
    A,
    B,
    C,
    D,
    #[serde(rename = "E_boundary")]
    EBoundary,
    Unclassifiable,
}

impl CaseTag {
    pub fn has_root(self) -> bool {
        matches!(self, CaseTag::ZetaInfReducible | CaseTag::A | CaseTag::B | CaseTag::C | CaseTag::EBoundary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionReport {
    pub case_tag: CaseTag,
    pub t_star: Option<f64>,
    /// Second moment of the tilted law, `E[Σ ξ̃² e^{-ξ̃}]`.
    pub sigma_tilde_sq: Option<f64>,
    /// `t*² Φ''(t*) - Ψ(t*)²`, kept alongside for comparison.
    pub sigma_tilde_sq_unnormalized: Option<f64>,
    pub reason: String,
    /// `(t, Ψ(t)/t)` on a log-spaced grid inside the domain.
    pub f_values: Vec<(f64, f64)>,
}

/// `G(t) = tΨ'(t) - Ψ(t)` together with a scale for relative tolerances.
pub fn g_function(profile: &LaplaceProfile, t: f64) -> Result<(f64, f64)> {
    let (psi, dpsi, _) = profile.psi_derivatives(t)?;
    let a = t * dpsi;
    Ok((a - psi, a.abs().max(psi.abs()).max(1.0)))
}

fn existence(profile: &LaplaceProfile) -> Result<(CaseTag, String)> {
    let psi0 = profile.psi(0.0)?;
    let zeta = profile.zeta();
    if zeta.is_infinite() {
        if !(psi0 > 0.0) {
            return Ok((CaseTag::ZetaInfIrreducible, format!("Φ(0) = {} ≤ 1, so G > 0 on (0, ∞)", psi0.exp())));
        }
        if profile.x_min().is_finite() && profile.mass_at_xmin() >= 1.0 {
            return Ok((
                CaseTag::ZetaInfIrreducible,
                format!("atom of mass {} ≥ 1 at x_min = {}", profile.mass_at_xmin(), profile.x_min()),
            ));
        }
        let why = if profile.x_min().is_finite() {
            format!("mass {} < 1 at x_min = {}", profile.mass_at_xmin(), profile.x_min())
        } else {
            "support unbounded below".to_string()
        };
        return Ok((CaseTag::ZetaInfReducible, why));
    }
    let phi_z = profile.phi(zeta, 0)?;
    if phi_z.is_nan() {
        return Ok((CaseTag::Unclassifiable, "Φ(ζ) not available".into()));
    }
    let subcritical = !(psi0 > 0.0);
    if phi_z.is_infinite() {
        return Ok(if subcritical {
            (CaseTag::D, "Φ(ζ) = ∞ but Φ(0) ≤ 1".into())
        } else {
            (CaseTag::A, "Φ(ζ) = ∞".into())
        });
    }
    let dphi_z = profile.phi(zeta, 1)?;
    if dphi_z.is_nan() {
        return Ok((CaseTag::Unclassifiable, "Φ'(ζ) not available".into()));
    }
    if dphi_z.is_infinite() {
        return Ok(if subcritical {
            (CaseTag::D, "Φ'(ζ) = ∞ but Φ(0) ≤ 1".into())
        } else {
            (CaseTag::B, "Φ(ζ) < ∞ = Φ'(ζ)".into())
        });
    }
    let (g, scale) = g_function(profile, zeta)?;
    if g.abs() <= ROOT_TOL * scale {
        Ok((CaseTag::EBoundary, format!("G(ζ) = {g:.3e}")))
    } else if g > 0.0 && !subcritical {
        Ok((CaseTag::C, format!("G(ζ) = {g:.6e} > 0")))
    } else {
        Ok((CaseTag::D, format!("G(ζ) = {g:.6e}, Ψ(0) = {psi0:.6e}")))
    }
}

fn root_in(profile: &LaplaceProfile, tag: CaseTag) -> Result<f64> {
    let zeta = profile.zeta();
    if tag == CaseTag::EBoundary {
        return Ok(zeta);
    }
    let g = |t: f64| g_function(profile, t).map(|v| v.0).unwrap_or(f64::NAN);
    let hi = if zeta.is_infinite() {
        let mut hi = 1.0;
        while !(g(hi) > 0.0) {
            hi *= 2.0;
            if hi > 1e8 {
                return Err(Error::NumericalFailure("no sign change of G below t = 1e8".into()));
            }
        }
        hi
    } else if tag == CaseTag::C {
        zeta
    } else {
        let mut k = 1;
        loop {
            let t = zeta * (1.0 - 0.5f64.powi(k));
            if g(t) > 0.0 {
                break t;
            }
            k += 1;
            if k > 60 {
                return Err(Error::NumericalFailure("no sign change of G below ζ".into()));
            }
        }
    };
    let mut t = bisect(g, 0.0, hi)?;
    // Newton polish with G'(t) = tΨ''(t).
    for _ in 0..3 {
        let (psi, dpsi, d2psi) = profile.psi_derivatives(t)?;
        let gt = t * dpsi - psi;
        let slope = t * d2psi;
        if !(slope > 0.0) {
            break;
        }
        let next = t - gt / slope;
        if !(next > 0.0 && next <= hi) {
            break;
        }
        let (gn, _) = g_function(profile, next)?;
        if gn.abs() >= gt.abs() {
            break;
        }
        t = next;
    }
    let (gt, scale) = g_function(profile, t)?;
    if gt.abs() > ROOT_TOL * scale.max(1.0) * 1e3 {
        return Err(Error::NumericalFailure(format!("G(t*) = {gt:.3e} after root-finding")));
    }
    Ok(t)
}

/// The root of `G` in `(0, ζ]` if it exists.
pub fn find_t_star(profile: &LaplaceProfile) -> Result<Option<f64>> {
    let (tag, _) = existence(profile)?;
    if !tag.has_root() {
        return Ok(None);
    }
    root_in(profile, tag).map(Some)
}

/// `(E[Σ ξ̃² e^{-ξ̃}], t² Φ''(t) - Ψ(t)²)` for the tilt at `t`.
pub fn tilted_second_moments(profile: &LaplaceProfile, t: f64) -> Result<(f64, f64)> {
    let p0 = profile.phi(t, 0)?;
    let p1 = profile.phi(t, 1)?;
    let p2 = profile.phi(t, 2)?;
    if !(p0.is_finite() && p1.is_finite() && p2.is_finite()) {
        return Err(Error::domain(format!("Φ or its derivatives infinite at t = {t}")));
    }
    let psi = p0.ln();
    // E[Σ (tξ + Ψ)² e^{-tξ}] / Φ with E[Σ ξ e^{-tξ}] = -Φ', E[Σ ξ² e^{-tξ}] = Φ''.
    let direct = (t * t * p2 - 2.0 * t * psi * p1 + psi * psi * p0) / p0;
    Ok((direct, t * t * p2 - psi * psi))
}

fn f_grid(profile: &LaplaceProfile, t_star: Option<f64>) -> Vec<(f64, f64)> {
    let top = if profile.zeta().is_finite() {
        profile.zeta() * (1.0 - 1e-6)
    } else {
        t_star.map_or(4.0, |t| (2.0 * t).max(4.0))
    };
    let lo = (top * 1e-3).min(1e-2);
    let n = 32;
    (0..n)
        .filter_map(|i| {
            let t = lo * (top / lo).powf(i as f64 / (n - 1) as f64);
            profile.psi(t).ok().map(|p| (t, p / t))
        })
        .collect()
}

pub fn classify_reduction(profile: &LaplaceProfile) -> Result<ReductionReport> {
    let (case_tag, reason) = existence(profile)?;
    let t_star = if case_tag.has_root() { Some(root_in(profile, case_tag)?) } else { None };
    let (sigma_tilde_sq, printed) = match t_star {
        Some(t) => match tilted_second_moments(profile, t) {
            Ok((d, p)) => (Some(d), Some(p)),
            Err(_) if case_tag == CaseTag::EBoundary => (None, None),
            Err(e) => return Err(e),
        },
        None => (None, None),
    };
    Ok(ReductionReport {
        case_tag,
        t_star,
        sigma_tilde_sq,
        sigma_tilde_sq_unnormalized: printed,
        reason,
        f_values: f_grid(profile, t_star),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiltedLaw {
    pub law: OffspringLaw,
    pub sigma_tilde_sq: f64,
}

/// The law of `t ξ + Ψ(t)`.
pub fn tilt_law(law: &OffspringLaw, t_star: f64) -> Result<TiltedLaw> {
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(Error::domain(format!("tilt parameter {t_star} must be positive")));
    }
    let profile = LaplaceProfile::from_law(law);
    let (sigma_tilde_sq, _) = tilted_second_moments(&profile, t_star)?;
    let psi = profile.psi(t_star)?;
    let tilted = match law {
        OffspringLaw::FiniteSupport { outcomes } => OffspringLaw::FiniteSupport {
            outcomes: outcomes
                .iter()
                .map(|o| Outcome::new(o.prob, o.displacements.iter().map(|&x| t_star * x + psi).collect::<Vec<_>>()))
                .collect(),
        },
        OffspringLaw::PoissonGaussian { m, mu, s0sq } => {
            OffspringLaw::PoissonGaussian { m: *m, mu: t_star * mu + psi, s0sq: t_star * t_star * s0sq }
        }
    };
    Ok(TiltedLaw { law: tilted, sigma_tilde_sq })
}
