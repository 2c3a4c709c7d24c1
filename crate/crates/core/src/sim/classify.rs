use serde::Serialize;

use super::barrier::Barrier;
use crate::constants::{a_critical, b_roots, k_const};

/// Smallest sparse-dip base accepted as "large" by default.
pub const DEFAULT_N_MIN: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Extinct,
    Survives,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub reason: String,
}

fn verdict(v: Verdict, reason: impl Into<String>) -> Classification {
    Classification { verdict: v, reason: reason.into() }
}

/// Decides extinction or survival of the process killed above `barrier`
/// from its `a⁺`, `a⁻` alone. Undecidable inputs give `Unknown`.
pub fn classify_general_barrier(sigma_sq: f64, barrier: &Barrier, n_min: u64) -> Classification {
    if let Err(e) = barrier.validate() {
        return verdict(Verdict::Unknown, format!("invalid barrier: {e}"));
    }
    let (Some(a_plus), Some(a_minus)) = (barrier.a_plus(), barrier.a_minus()) else {
        return verdict(Verdict::Unknown, "tabulated barrier has no limsup/liminf");
    };
    let a_c = match a_critical(sigma_sq) {
        Ok(a) => a,
        Err(e) => return verdict(Verdict::Unknown, e.to_string()),
    };
    if a_plus < a_c {
        return verdict(Verdict::Extinct, format!("a+ = {a_plus} < a_c = {a_c}"));
    }
    if a_minus > a_c {
        return verdict(Verdict::Survives, format!("a- = {a_minus} > a_c = {a_c}"));
    }
    if matches!(barrier, Barrier::OscillatingParity { .. }) && a_minus < a_c {
        return verdict(Verdict::Extinct, format!("parity-oscillating barrier with a- = {a_minus} < a_c = {a_c}"));
    }
    let threshold = match b_roots(sigma_sq, a_plus).ok().and_then(|r| r.b_a()) {
        Some(b) => k_const(sigma_sq) / (b * b),
        None => return verdict(Verdict::Unknown, format!("no corridor slope at a+ = {a_plus}")),
    };
    if a_minus < threshold {
        return verdict(Verdict::Extinct, format!("a- = {a_minus} < 3π²σ²/(2 b_(a+)²) = {threshold}"));
    }
    if let Barrier::SparseDip { base, .. } = barrier {
        if a_minus > threshold {
            return if *base >= n_min {
                verdict(
                    Verdict::Survives,
                    format!(
                        "sparse dips with a- = {a_minus} > {threshold} and base {base} ≥ {n_min}; survival holds for large enough bases"
                    ),
                )
            } else {
                verdict(Verdict::Unknown, format!("sparse-dip base {base} < {n_min}"))
            };
        }
    }
    if a_plus == a_c && a_minus == a_c {
        return verdict(Verdict::Unknown, format!("a = a_c = {a_c} is undecided"));
    }
    verdict(Verdict::Unknown, format!("a- = {a_minus} ≤ a_c ≤ a+ = {a_plus} with no applicable criterion"))
}
