//! Critical constants of the cube-root barrier.
//!
//! With `K = 3π²σ²/2`, the barrier coefficient `a` and the profile
//! coefficient `b` are linked by `a = b + K/b²`, whose minimum over `b > 0`
//! is `a_c = (3/2)(3π²σ²)^{1/3}`, attained at `b = 2a_c/3`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Distance to `a_c` inside which the double root is returned.
pub const DOUBLE_ROOT_TOL: f64 = 1e-9;

// π as an unevaluated sum of two doubles.
const PI_HI: f64 = std::f64::consts::PI;
const PI_LO: f64 = 1.2246467991473532e-16;

#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd(p, a.mul_add(b, -p))
}

fn dd_mul(x: Dd, y: Dd) -> Dd {
    let p = two_prod(x.0, y.0);
    let lo = p.1 + (x.0 * y.1 + x.1 * y.0);
    two_sum(p.0, lo)
}

fn dd_sub(x: Dd, y: Dd) -> Dd {
    let s = two_sum(x.0, -y.0);
    two_sum(s.0, s.1 + x.1 - y.1)
}

/// `K = 3π²σ²/2`.
pub fn k_const(sigma_sq: f64) -> f64 {
    1.5 * std::f64::consts::PI * std::f64::consts::PI * sigma_sq
}

/// `a_c = (3/2)(3π²σ²)^{1/3}`, with the cube root refined in double-double.
pub fn a_critical(sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::domain(format!("σ² = {sigma_sq} must be positive")));
    }
    let pi = Dd(PI_HI, PI_LO);
    let v = dd_mul(dd_mul(dd_mul(pi, pi), Dd(3.0, 0.0)), Dd(sigma_sq, 0.0));
    let y = v.0.cbrt();
    let y3 = dd_mul(dd_mul(Dd(y, 0.0), Dd(y, 0.0)), Dd(y, 0.0));
    let r = dd_sub(v, y3);
    let corr = (r.0 + r.1) / (3.0 * y * y);
    let root = two_sum(y, corr);
    Ok(1.5 * root.0 + 1.5 * root.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Roots {
    None,
    Double { b: f64 },
    Pair { b_small: f64, b_a: f64 },
}

impl Roots {
    /// The larger root, if any.
    pub fn b_a(&self) -> Option<f64> {
        match *self {
            Roots::None => None,
            Roots::Double { b } => Some(b),
            Roots::Pair { b_a, .. } => Some(b_a),
        }
    }
    pub fn b_small(&self) -> Option<f64> {
        match *self {
            Roots::None => None,
            Roots::Double { b } => Some(b),
            Roots::Pair { b_small, .. } => Some(b_small),
        }
    }
}

/// Positive roots of `b³ - a b² + K = 0`.
pub fn b_roots(sigma_sq: f64, a: f64) -> Result<Roots> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("a = {a} must be positive")));
    }
    let ac = a_critical(sigma_sq)?;
    let k = k_const(sigma_sq);
    if (a - ac).abs() <= DOUBLE_ROOT_TOL {
        return Ok(Roots::Double { b: 2.0 * ac / 3.0 });
    }
    if a < ac {
        return Ok(Roots::None);
    }
    let p = |b: f64| b * b * (b - a) + k;
    let mid = 2.0 * ac / 3.0;
    let polish = |mut b: f64| {
        for _ in 0..2 {
            let d = b * (3.0 * b - 2.0 * a);
            if d != 0.0 {
                let nb = b - p(b) / d;
                if p(nb).abs() < p(b).abs() {
                    b = nb;
                }
            }
        }
        b
    };
    let b_small = polish(bisect(p, 0.0, mid)?);
    let b_a = polish(bisect(p, mid, a)?);
    Ok(Roots::Pair { b_small, b_a })
}

/// `|a - b - K/b²|`.
pub fn root_residual(sigma_sq: f64, a: f64, b: f64) -> f64 {
    (a - b - k_const(sigma_sq) / (b * b)).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BIteration {
    /// `b_1, ..., b_n`, truncated at the first non-positive iterate.
    pub iterates: Vec<f64>,
    pub stopped_negative: bool,
}

/// Iterates `b ↦ a - K/b²` from `b0`.
pub fn b_iteration(sigma_sq: f64, a: f64, b0: f64, n: usize) -> Result<BIteration> {
    if !(b0 > 0.0) || n == 0 {
        return Err(Error::domain("b0 must be positive and n ≥ 1"));
    }
    let k = k_const(sigma_sq);
    let mut iterates = Vec::with_capacity(n);
    let mut b = b0;
    for _ in 0..n {
        b = a - k / (b * b);
        iterates.push(b);
        if b <= 0.0 {
            return Ok(BIteration { iterates, stopped_negative: true });
        }
    }
    Ok(BIteration { iterates, stopped_negative: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub g_max: f64,
    pub negative: bool,
}

/// Maximum over `α ∈ [0, 1]` of
/// `(b + K/b² - a) f(α) + E^{-1/3} (a - K/b²) f(0)`, `f(α) = (α + 1/(E-1))^{1/3}`.
pub fn survival_certificate(sigma_sq: f64, a: f64, b: f64, growth_factor: u64) -> Result<Certificate> {
    if !(b > 0.0) {
        return Err(Error::domain(format!("b = {b} must be positive")));
    }
    if growth_factor < 2 {
        return Err(Error::domain("growth factor must be at least 2"));
    }
    let e = growth_factor as f64;
    let k = k_const(sigma_sq);
    let f = |alpha: f64| (alpha + 1.0 / (e - 1.0)).cbrt();
    let lead = b + k / (b * b) - a;
    let tail = e.powf(-1.0 / 3.0) * (a - k / (b * b)) * f(0.0);
    // f is increasing, so the maximum sits at an endpoint.
    let g_max = (lead * f(0.0) + tail).max(lead * f(1.0) + tail);
    Ok(Certificate { g_max, negative: g_max < 0.0 })
}

/// Smallest integer `E ∈ [2, e_max]` whose certificate is negative.
pub fn minimal_growth_factor(sigma_sq: f64, a: f64, b: f64, e_max: u64) -> Result<Option<u64>> {
    for e in 2..=e_max {
        if survival_certificate(sigma_sq, a, b, e)?.negative {
            return Ok(Some(e));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    // (3/2)(3π²)^{1/3} and (3/2)(3π² · 0.37)^{1/3} from a 40-digit evaluation.
    const AC_1: f64 = 4.640501589420203896453417810833580436931;
    const AC_037: f64 = 3.331441313130706607077903560580271766749;

    #[test]
    fn a_critical_high_precision() {
        assert!((a_critical(1.0).unwrap() - AC_1).abs() <= 1e-12 * AC_1);
        assert!((a_critical(0.37).unwrap() - AC_037).abs() <= 1e-12 * AC_037);
        assert!((a_critical(8.0).unwrap() - 2.0 * AC_1).abs() <= 1e-12 * AC_1);
        let s = 2.0 / (3.0 * std::f64::consts::PI.powi(2));
        assert!((a_critical(s).unwrap() - 1.5 * 2f64.cbrt()).abs() < 1e-13);
        assert!(a_critical(0.0).is_err());
    }

    #[test]
    fn roots_examples() {
        let ac = a_critical(1.0).unwrap();
        assert_eq!(b_roots(1.0, ac).unwrap(), Roots::Double { b: 2.0 * ac / 3.0 });
        assert!((2.0 * ac / 3.0 - 3.0937).abs() < 1e-4);
        assert_eq!(b_roots(1.0, 4.0).unwrap(), Roots::None);
        let Roots::Pair { b_small, b_a } = b_roots(1.0, 6.0).unwrap() else { panic!() };
        assert!((b_small - 1.90).abs() < 0.01 && (b_a - 5.51).abs() < 0.01);
        assert!(root_residual(1.0, 6.0, b_small) < 1e-10 * 6.0);
        assert!(root_residual(1.0, 6.0, b_a) < 1e-10 * 6.0);
        assert!(b_roots(1.0, -1.0).is_err());
    }

    #[test]
    fn iteration_examples() {
        let ac = a_critical(1.0).unwrap();
        let mid = 2.0 * ac / 3.0;
        let it = b_iteration(1.0, ac, mid + 0.1, 50).unwrap();
        assert!(!it.stopped_negative);
        assert!((it.iterates[49] - mid).abs() < 0.1);
        assert!(it.iterates.windows(2).all(|w| w[1] <= w[0]));
        let it = b_iteration(1.0, 6.0, 5.6, 200).unwrap();
        let b_a = b_roots(1.0, 6.0).unwrap().b_a().unwrap();
        assert!((it.iterates.last().unwrap() - b_a).abs() < 1e-8);
        let it = b_iteration(1.0, 4.0, 3.0937, 1000).unwrap();
        assert!(it.stopped_negative);
    }

    #[test]
    fn certificate_minimal_factor() {
        let ac = a_critical(1.0).unwrap();
        let b = 2.0 * ac / 3.0;
        assert_eq!(minimal_growth_factor(1.0, 6.0, b, 1000).unwrap(), Some(36));
        // closed-form threshold E > ((a - a_c/3)/(a - a_c))³
        let thr = ((6.0 - ac / 3.0) / (6.0 - ac)).powi(3);
        assert_eq!(thr.floor() as u64 + 1, 36);
        for e in 36..500 {
            assert!(survival_certificate(1.0, 6.0, b, e).unwrap().negative);
        }
        for bi in 1..100 {
            assert!(!survival_certificate(1.0, 4.0, 0.1 * bi as f64, 1000).unwrap().negative);
        }
        assert!(survival_certificate(1.0, 6.0, 0.0, 10).is_err());
        assert!(survival_certificate(1.0, 6.0, 1.0, 1).is_err());
    }

    #[test]
    fn a_critical_is_minimum_golden_section() {
        for &s in &[0.3, 1.0, 2.5] {
            let k = k_const(s);
            let h = |b: f64| b + k / (b * b);
            let (mut lo, mut hi) = (0.1, 50.0);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let x1 = hi - g * (hi - lo);
                let x2 = lo + g * (hi - lo);
                if h(x1) < h(x2) {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            let m = h(0.5 * (lo + hi));
            assert!((m - a_critical(s).unwrap()).abs() < 1e-10);
        }
    }
}
