use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A generation-indexed killing threshold `φ(i)`, `i ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Barrier {
    /// `a · i^{1/3}`
    PowerLaw { a: f64 },
    /// `eps · i`
    Linear { eps: f64 },
    /// `a_plus · i^{1/3}` for even `i`, `a_minus · i^{1/3}` for odd `i`.
    OscillatingParity { a_plus: f64, a_minus: f64 },
    /// `a_minus · i^{1/3}` when `i` is a power of `base`, else `a_plus · i^{1/3}`.
    SparseDip { a_plus: f64, a_minus: f64, base: u64 },
    /// `values[i - 1]`; the last value repeats beyond the table.
    Table { values: Vec<f64> },
}

fn is_power_of(mut n: u64, base: u64) -> bool {
    while n.is_multiple_of(base) {
        n /= base;
    }
    n == 1
}

impl Barrier {
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        match self {
            Barrier::PowerLaw { a } if finite(*a) => Ok(()),
            Barrier::Linear { eps } if finite(*eps) => Ok(()),
            Barrier::OscillatingParity { a_plus, a_minus } if finite(*a_plus) && finite(*a_minus) => Ok(()),
            Barrier::SparseDip { a_plus, a_minus, base } if finite(*a_plus) && finite(*a_minus) => {
                if *base < 2 {
                    Err(Error::domain("sparse-dip base must be at least 2"))
                } else {
                    Ok(())
                }
            }
            Barrier::Table { values } if !values.is_empty() && values.iter().all(|v| !v.is_nan()) => Ok(()),
            _ => Err(Error::domain(format!("malformed barrier {self:?}"))),
        }
    }

    #[inline]
    pub fn phi(&self, i: u64) -> f64 {
        let c = (i as f64).cbrt();
        match self {
            Barrier::PowerLaw { a } => a * c,
            Barrier::Linear { eps } => eps * i as f64,
            Barrier::OscillatingParity { a_plus, a_minus } => {
                if i.is_multiple_of(2) {
                    a_plus * c
                } else {
                    a_minus * c
                }
            }
            Barrier::SparseDip { a_plus, a_minus, base } => {
                if i >= 1 && is_power_of(i, *base) {
                    a_minus * c
                } else {
                    a_plus * c
                }
            }
            Barrier::Table { values } => {
                let idx = (i.max(1) - 1) as usize;
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// `limsup φ(n)/n^{1/3}` in closed form, `None` for tables.
    pub fn a_plus(&self) -> Option<f64> {
        match self {
            Barrier::PowerLaw { a } => Some(*a),
            Barrier::Linear { eps } => Some(linear_limit(*eps)),
            Barrier::OscillatingParity { a_plus, a_minus } | Barrier::SparseDip { a_plus, a_minus, .. } => {
                Some(a_plus.max(*a_minus))
            }
            Barrier::Table { .. } => None,
        }
    }

    /// `liminf φ(n)/n^{1/3}` in closed form, `None` for tables.
    pub fn a_minus(&self) -> Option<f64> {
        match self {
            Barrier::PowerLaw { a } => Some(*a),
            Barrier::Linear { eps } => Some(linear_limit(*eps)),
            Barrier::OscillatingParity { a_plus, a_minus } | Barrier::SparseDip { a_plus, a_minus, .. } => {
                Some(a_plus.min(*a_minus))
            }
            Barrier::Table { .. } => None,
        }
    }
}

fn linear_limit(eps: f64) -> f64 {
    if eps > 0.0 {
        f64::INFINITY
    } else if eps < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}
