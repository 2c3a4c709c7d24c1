//! Closed-form transforms with a finite abscissa of convergence `ζ`.
//!
//! Neither family can be fed to the simulator; they exist so the reduction
//! module can be exercised on every boundary behaviour at `ζ`.

use std::fmt::Debug;

/// A user-supplied transform `Φ` with its derivatives.
pub trait ClosedFormTransform: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn zeta(&self) -> f64;
    fn x_min(&self) -> f64 {
        f64::NEG_INFINITY
    }
    fn mass_at_xmin(&self) -> f64 {
        0.0
    }
    /// `Φ^{(order)}(t)` on `[0, ζ]`; may be `+∞` at `t = ζ`.
    fn phi(&self, t: f64, order: u8) -> f64;
}

/// Displacements `x0 - Y`, `Y ~ Exp(rate)`, with `m` children on average.
/// `Φ(t) = m e^{-t x0} rate / (rate - t)`, so `Φ(ζ) = ∞` with `ζ = rate`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpTail {
    pub m: f64,
    pub x0: f64,
    pub rate: f64,
}

impl ClosedFormTransform for ExpTail {
    fn name(&self) -> &str {
        "exp-tail"
    }
    fn zeta(&self) -> f64 {
        self.rate
    }
    fn phi(&self, t: f64, order: u8) -> f64 {
        if t >= self.rate {
            return f64::INFINITY;
        }
        let gap = self.rate - t;
        let phi = self.m * (-t * self.x0).exp() * self.rate / gap;
        let d1 = -self.x0 + 1.0 / gap;
        let d2 = 1.0 / (gap * gap);
        match order {
            0 => phi,
            1 => d1 * phi,
            _ => (d2 + d1 * d1) * phi,
        }
    }
}

/// Displacements `x0 - J` with `J ∈ {1, 2, ...}` and
/// `P(J = j) ∝ e^{-ζ j} / (j (j+1))` (`order = 2`) or
/// `∝ e^{-ζ j} / (j (j+1) (j+2))` (`order = 3`).
///
/// At `t = ζ`: order 2 has `Φ(ζ) < ∞ = Φ'(ζ)`; order 3 has `Φ(ζ), Φ'(ζ) < ∞`
/// and `Φ''(ζ) = ∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTail {
    pub m: f64,
    pub x0: f64,
    pub zeta: f64,
    pub order: u8,
    norm: f64,
}

impl HarmonicTail {
    pub fn new(m: f64, x0: f64, zeta: f64, order: u8) -> Self {
        assert!(order == 2 || order == 3, "order must be 2 or 3");
        let mut h = HarmonicTail { m, x0, zeta, order, norm: 1.0 };
        h.norm = h.sums((-zeta).exp())[0];
        h
    }

    /// `[Σ w_j x^j, Σ j w_j x^j, Σ j² w_j x^j]`.
    fn sums(&self, x: f64) -> [f64; 3] {
        if x < 0.5 {
            let mut s = [0.0; 3];
            let mut xp = 1.0;
            for j in 1..2000u32 {
                let jf = j as f64;
                xp *= x;
                let w = match self.order {
                    2 => 1.0 / (jf * (jf + 1.0)),
                    _ => 1.0 / (jf * (jf + 1.0) * (jf + 2.0)),
                };
                let term = w * xp;
                s[0] += term;
                s[1] += jf * term;
                s[2] += jf * jf * term;
                if term * jf * jf < 1e-18 * s[2] {
                    break;
                }
            }
            return s;
        }
        if x >= 1.0 {
            return match self.order {
                2 => [1.0, f64::INFINITY, f64::INFINITY],
                _ => [0.25, 0.5, f64::INFINITY],
            };
        }
        let l = -(-x).ln_1p();
        let inv = 1.0 / x;
        match self.order {
            2 => {
                let s1 = (l - x) * inv;
                [1.0 - (1.0 - x) * l * inv, s1, x / (1.0 - x) - s1]
            }
            _ => {
                let y = 1.0 - inv;
                [
                    0.5 * (l * y * y + 1.5 - inv),
                    l * (x - 1.0) * inv * inv + inv - 0.5,
                    l * (2.0 - x) * inv * inv - 2.0 * inv,
                ]
            }
        }
    }
}

impl ClosedFormTransform for HarmonicTail {
    fn name(&self) -> &str {
        if self.order == 2 {
            "harmonic-tail-2"
        } else {
            "harmonic-tail-3"
        }
    }
    fn zeta(&self) -> f64 {
        self.zeta
    }
    fn phi(&self, t: f64, order: u8) -> f64 {
        let x = if t >= self.zeta { 1.0 } else { (t - self.zeta).exp() };
        let [s0, s1, s2] = self.sums(x);
        let pre = self.m / self.norm * (-t * self.x0).exp();
        let x0 = self.x0;
        match order {
            0 => pre * s0,
            1 => pre * (s1 - x0 * s0),
            _ => pre * (x0 * x0 * s0 - 2.0 * x0 * s1 + s2),
        }
    }
}
