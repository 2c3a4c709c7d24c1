//! The barrier profile `f' = (a/3) t^{-2/3} - π²σ²/(2f²)`, `f(0) = s`.
//!
//! In `u = t^{1/3}` and `h(u) = f(u³)` the equation reads
//! `h' = a - K u²/h²` with `K = 3π²σ²/2`, which is regular at the origin.
//! The right-hand side is homogeneous of degree zero, so `r = h/u` solves the
//! autonomous equation `dr/dτ = a - r - K/r²` in `τ = ln u`.
//!
//! The solver runs in up to four phases:
//! 1. `h(u)` on `[0, s]`;
//! 2. `r(τ)` beyond `u = s`;
//! 3. near blow-down the roles of variable and unknown swap (`u(h)` or
//!    `τ(r)`), and the swapped equation is integrated to `h = 0` exactly.
//!
//! Growth is declared only when `h/u` exceeds the smaller root of
//! `b³ - a b² + K` (the ray through that root is itself a solution, so `h`
//! can never cross it again) and the limit of `h/u`, extrapolated by a
//! twice-iterated Aitken transform on quarter-decade checkpoints, has settled.

mod dopri;

use serde::Serialize;

use crate::constants::{a_critical, b_roots, k_const, DOUBLE_ROOT_TOL};
use crate::error::{Error, Result};
use crate::numeric::{bisect, gauss_legendre4, integrate as quadrature};
use dopri::{integrate, Control, Segment, Tolerance};

/// `u` beyond which an unsettled growth candidate is reported as unclassified.
pub const GROWTH_HORIZON_U: f64 = 1e6;
/// Largest `ln u` explored while waiting for blow-down when `a < a_c`.
pub const LOG_U_CAP: f64 = 700.0;
/// Relative stability of the extrapolated slope over two decades of `u`.
pub const SLOPE_STABILITY: f64 = 0.005;
/// Distance below `a_c` refused by [`extinction_rate`].
pub const RATE_MARGIN: f64 = 1e-6;

const CHECKPOINTS_PER_DECADE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ProfileClass {
    /// `f` reaches zero at `t_max`; `log_t_max` stays finite when `t_max` overflows.
    BlowsDown {
        t_max: f64,
        log_t_max: f64,
    },
    GrowsLikeCubeRoot {
        b_limit: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// x = u, y = h
    Direct,
    /// x = h, y = u
    DirectSwap,
    /// x = ln u, y = h/u
    Log,
    /// x = h/u, y = ln u
    LogSwap,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    phase: Phase,
    seg: Segment,
}

impl Piece {
    /// `u` at the start and end of the piece.
    fn u_range(&self) -> (f64, f64) {
        let s = &self.seg;
        match self.phase {
            Phase::Direct => (s.x0, s.x1()),
            Phase::DirectSwap => (s.y0(), s.y1()),
            Phase::Log => (s.x0.exp(), s.x1().exp()),
            Phase::LogSwap => (s.y0().exp(), s.y1().exp()),
        }
    }

    /// `(u, h)` at the end of the piece.
    fn end_node(&self) -> (f64, f64) {
        let s = &self.seg;
        match self.phase {
            Phase::Direct => (s.x1(), s.y1()),
            Phase::DirectSwap => (s.y1(), s.x1()),
            Phase::Log => {
                let u = s.x1().exp();
                (u, u * s.y1())
            }
            Phase::LogSwap => {
                let u = s.y1().exp();
                (u, u * s.x1())
            }
        }
    }

    fn h_at(&self, u: f64) -> f64 {
        let s = &self.seg;
        let invert = |target: f64| {
            let g = |x: f64| s.eval(x) - target;
            if g(s.x0) == 0.0 {
                s.x0
            } else if g(s.x1()) == 0.0 {
                s.x1()
            } else {
                bisect(g, s.x0, s.x1()).unwrap_or(f64::NAN)
            }
        };
        match self.phase {
            Phase::Direct => s.eval(u),
            Phase::DirectSwap => invert(u),
            Phase::Log => u * s.eval(u.ln()),
            Phase::LogSwap => u * invert(u.ln()),
        }
    }

    /// `∫ v²/h(v)² dv` over the piece.
    fn integral(&self, a: f64, k: f64) -> f64 {
        let s = self.seg;
        match self.phase {
            Phase::Direct => gauss_legendre4(|x| (x / s.eval(x)).powi(2), s.x0, s.x1()),
            Phase::DirectSwap => gauss_legendre4(
                |x| {
                    let u = s.eval(x);
                    u * u / (a * x * x - k * u * u)
                },
                s.x0,
                s.x1(),
            ),
            Phase::Log => gauss_legendre4(|x| x.exp() / s.eval(x).powi(2), s.x0, s.x1()),
            Phase::LogSwap => gauss_legendre4(|x| s.eval(x).exp() / (a * x * x - x * x * x - k), s.x0, s.x1()),
        }
    }

    fn rescaled(&self, mu: f64) -> Piece {
        let mut seg = self.seg;
        match self.phase {
            Phase::Direct | Phase::DirectSwap => {
                seg.x0 *= mu;
                seg.dx *= mu;
                for c in &mut seg.c {
                    *c *= mu;
                }
            }
            Phase::Log => seg.x0 += mu.ln(),
            Phase::LogSwap => seg.c[0] += mu.ln(),
        }
        Piece { phase: self.phase, seg }
    }
}

/// A solved profile together with its classification.
#[derive(Clone, Debug)]
pub struct ProfileSolution {
    pub sigma_sq: f64,
    pub a: f64,
    pub s: f64,
    pub tol: f64,
    /// Nodes in `u = t^{1/3}` up to the requested horizon (or blow-down).
    pub grid: Vec<f64>,
    /// `h(u) = f(u³)` at the nodes.
    pub values: Vec<f64>,
    pub classification: ProfileClass,
    /// Largest deviation of `h(u) - s - a u + K ∫_0^u v²/h² dv`, relative to `s + a u`.
    pub residual_max: f64,
    pieces: Vec<Piece>,
}

impl ProfileSolution {
    /// `h(u)` anywhere on the integrated range.
    pub fn eval_h(&self, u: f64) -> Option<f64> {
        if u == 0.0 {
            return Some(self.s);
        }
        let idx = self.pieces.partition_point(|p| p.u_range().1 < u);
        let piece = self.pieces.get(idx)?;
        let (lo, _) = piece.u_range();
        if u < lo {
            return None;
        }
        let h = piece.h_at(u);
        h.is_finite().then_some(h)
    }

    /// `f(t)` anywhere on the integrated range.
    pub fn eval_f(&self, t: f64) -> Option<f64> {
        self.eval_h(t.cbrt())
    }

    /// `(t, f(t))` at the stored nodes.
    pub fn t_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().zip(&self.values).map(|(&u, &h)| (u * u * u, h))
    }

    /// Largest `u` covered by the integration.
    pub fn u_end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.u_range().1)
    }

    pub fn blow_down(&self) -> Option<f64> {
        match self.classification {
            ProfileClass::BlowsDown { t_max, .. } => Some(t_max),
            ProfileClass::GrowsLikeCubeRoot { .. } => None,
        }
    }
}

fn validate(sigma_sq: f64, a: f64, s: f64, t_horizon: f64, tol: f64) -> Result<()> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::domain(format!("σ² = {sigma_sq} must be positive")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("a = {a} must be non-negative")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!("s = {s} must be positive")));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::domain(format!("horizon {t_horizon} must be positive")));
    }
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::domain(format!("tol = {tol} outside [1e-12, 1e-4]")));
    }
    Ok(())
}

fn aitken(r0: f64, r1: f64, r2: f64) -> f64 {
    let d1 = r1 - r0;
    let d2 = r2 - r1;
    let den = d2 - d1;
    if den.abs() <= 1e-300 || (d2 * d2 / den).abs() > (r2 - r1).abs() * 1e6 {
        r2
    } else {
        r2 - d2 * d2 / den
    }
}

/// Integrates the profile with `f(0) = s` and classifies it.
///
/// Integration continues past `t_horizon` when needed for the classification;
/// the stored grid is cut at the horizon.
pub fn solve_profile(sigma_sq: f64, a: f64, s: f64, t_horizon: f64, tol: f64) -> Result<ProfileSolution> {
    validate(sigma_sq, a, s, t_horizon, tol)?;
    let k = k_const(sigma_sq);
    let ac = a_critical(sigma_sq)?;
    let supercritical = a >= ac - DOUBLE_ROOT_TOL;
    let b_small = if supercritical { b_roots(sigma_sq, a.max(ac))?.b_small() } else { None };
    let turn = (2.0 * k).cbrt();
    let inner = 0.1 * tol;

    let mut pieces = Vec::new();
    let classification;

    // Phase 1: h(u) on [0, s].
    let direct_tol = Tolerance { atol: inner * s, rtol: inner };
    let run = integrate(
        |u, h| a - k * u * u / (h * h),
        0.0,
        s,
        s,
        1e-3 * s,
        &direct_tol,
        |_, dh| if dh < -1.0 { Control::Stop } else { Control::Continue },
    )?;
    pieces.extend(run.segments.iter().map(|&seg| Piece { phase: Phase::Direct, seg }));
    let last = *run.segments.last().expect("at least one step");

    if run.stopped {
        let h_sw = last.y1();
        let swap = integrate(
            |h, u| h * h / (a * h * h - k * u * u),
            h_sw,
            last.x1(),
            0.0,
            1e-2 * h_sw,
            &direct_tol,
            |_, _| Control::Continue,
        )?;
        let u_max = swap.segments.last().expect("non-empty").y1();
        pieces.extend(swap.segments.iter().map(|&seg| Piece { phase: Phase::DirectSwap, seg }));
        let log_t_max = 3.0 * u_max.ln();
        classification = Some(ProfileClass::BlowsDown { t_max: log_t_max.exp(), log_t_max });
    } else {
        // Phase 2: r(τ).
        let tau0 = s.ln();
        let r0 = last.y1() / s;
        let tau_h = t_horizon.cbrt().ln();
        let tau_end = if supercritical { GROWTH_HORIZON_U.ln().max(tau0 + 6.0).max(tau_h) } else { LOG_U_CAP };
        let log_tol = Tolerance { atol: inner, rtol: inner };
        let step = std::f64::consts::LN_10 / CHECKPOINTS_PER_DECADE as f64;
        let window = 2 * CHECKPOINTS_PER_DECADE;
        let mut next_cp = tau0 + step;
        let mut rs: Vec<f64> = Vec::new();
        let mut est1: Vec<f64> = Vec::new();
        let mut est: Vec<f64> = Vec::new();
        let mut growth = None;
        let mut turned = false;
        let run = integrate(
            |_, r| a - r - k / (r * r),
            tau0,
            r0,
            tau_end,
            1e-2,
            &log_tol,
            |seg, dr| {
                let r1 = seg.y1();
                if growth.is_some() {
                    return if seg.x1() >= tau_h { Control::Stop } else { Control::Continue };
                }
                if r1 < turn && dr < -1.0 {
                    turned = true;
                    return Control::Stop;
                }
                while next_cp <= seg.x1() {
                    rs.push(seg.eval(next_cp));
                    next_cp += step;
                    let n = rs.len();
                    if n >= 3 {
                        est1.push(aitken(rs[n - 3], rs[n - 2], rs[n - 1]));
                    }
                    let n1 = est1.len();
                    if n1 >= 3 {
                        est.push(aitken(est1[n1 - 3], est1[n1 - 2], est1[n1 - 1]));
                    }
                    let m = est.len();
                    if let (Some(bs), true) = (b_small, m > window) {
                        let b_hat = est[m - 1];
                        let settled = (b_hat - est[m - 1 - window]).abs() <= SLOPE_STABILITY * b_hat;
                        if settled && rs[n - 1] > bs && b_hat >= turn * (1.0 - 1e-9) {
                            growth = Some(b_hat);
                            return if seg.x1() >= tau_h { Control::Stop } else { Control::Continue };
                        }
                    }
                }
                Control::Continue
            },
        )?;
        pieces.extend(run.segments.iter().map(|&seg| Piece { phase: Phase::Log, seg }));
        let last = *run.segments.last().expect("non-empty");
        if let Some(b_limit) = growth {
            classification = Some(ProfileClass::GrowsLikeCubeRoot { b_limit });
        } else if turned {
            let r_sw = last.y1();
            let swap = integrate(
                |r, _| r * r / (a * r * r - r * r * r - k),
                r_sw,
                last.x1(),
                0.0,
                1e-2 * r_sw,
                &Tolerance { atol: inner, rtol: 0.0 },
                |_, _| Control::Continue,
            )?;
            let ln_u_max = swap.segments.last().expect("non-empty").y1();
            pieces.extend(swap.segments.iter().map(|&seg| Piece { phase: Phase::LogSwap, seg }));
            classification = Some(ProfileClass::BlowsDown { t_max: (3.0 * ln_u_max).exp(), log_t_max: 3.0 * ln_u_max });
        } else {
            return Err(Error::Unclassified { horizon_u: last.x1().exp() });
        }
    }

    let classification = classification.expect("set on every path");
    let (grid, values, residual_max) = nodes_and_residual(&pieces, s, a, k, t_horizon.cbrt());
    Ok(ProfileSolution { sigma_sq, a, s, tol, grid, values, classification, residual_max, pieces })
}

fn nodes_and_residual(pieces: &[Piece], s: f64, a: f64, k: f64, u_horizon: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let mut grid = vec![0.0];
    let mut values = vec![s];
    let mut integral = 0.0;
    let mut residual_max: f64 = 0.0;
    for p in pieces {
        integral += p.integral(a, k);
        let (u, h) = p.end_node();
        if !(h > 0.0) {
            continue;
        }
        let res = (h - s - a * u + k * integral).abs() / (s + a * u);
        residual_max = residual_max.max(res);
        let prev = *grid.last().expect("non-empty");
        if u <= u_horizon {
            grid.push(u);
            values.push(h);
        } else if prev < u_horizon {
            grid.push(u_horizon);
            values.push(p.h_at(u_horizon));
        }
    }
    (grid, values, residual_max)
}

/// `f_λ(t) = λ^{-1/3} f(λ t)`, the profile with `f_λ(0) = λ^{-1/3} s`.
pub fn rescale(sol: &ProfileSolution, lambda: f64) -> ProfileSolution {
    let mu = lambda.powf(-1.0 / 3.0);
    let classification = match sol.classification {
        ProfileClass::BlowsDown { t_max, log_t_max } => {
            ProfileClass::BlowsDown { t_max: t_max / lambda, log_t_max: log_t_max - lambda.ln() }
        }
        g @ ProfileClass::GrowsLikeCubeRoot { .. } => g,
    };
    ProfileSolution {
        sigma_sq: sol.sigma_sq,
        a: sol.a,
        s: sol.s * mu,
        tol: sol.tol,
        grid: sol.grid.iter().map(|u| u * mu).collect(),
        values: sol.values.iter().map(|h| h * mu).collect(),
        classification,
        residual_max: sol.residual_max,
        pieces: sol.pieces.iter().map(|p| p.rescaled(mu)).collect(),
    }
}

/// Blow-down time of the profile started at `s`, or `None` when it grows.
pub fn blow_down_time(sigma_sq: f64, a: f64, s: f64, tol: f64) -> Result<Option<f64>> {
    let sol = solve_profile(sigma_sq, a, s, f64::MIN_POSITIVE, tol)?;
    Ok(sol.blow_down())
}

/// `c = t_max(1)^{-1/3}`: the starting value whose profile vanishes exactly at `t = 1`.
pub fn extinction_rate(sigma_sq: f64, a: f64, tol: f64) -> Result<f64> {
    let ac = a_critical(sigma_sq)?;
    if !(a >= 0.0) || a >= ac - RATE_MARGIN {
        return Err(Error::domain(format!("a = {a} must lie in [0, a_c - {RATE_MARGIN}) with a_c = {ac}")));
    }
    let sol = solve_profile(sigma_sq, a, 1.0, f64::MIN_POSITIVE, tol)?;
    match sol.classification {
        ProfileClass::BlowsDown { log_t_max, .. } => Ok((-log_t_max / 3.0).exp()),
        ProfileClass::GrowsLikeCubeRoot { .. } => {
            Err(Error::NumericalFailure(format!("profile with a = {a} < a_c did not blow down")))
        }
    }
}

/// Limit of `f(t)/t^{1/3}` for a growing profile.
pub fn asymptotic_slope(sol: &ProfileSolution) -> Result<f64> {
    match sol.classification {
        ProfileClass::GrowsLikeCubeRoot { b_limit } => Ok(b_limit),
        ProfileClass::BlowsDown { .. } => Err(Error::domain("profile blows down; no asymptotic slope")),
    }
}

/// `f(t) - s - a t^{1/3} + (π²σ²/2) ∫_0^t f(r)^{-2} dr`, the defect of a
/// candidate profile `f` in integral form. The integral runs in `u = r^{1/3}`,
/// where its integrand `K u²/f(u³)²` is bounded.
pub fn integral_identity_residual<F: Fn(f64) -> f64>(sigma_sq: f64, a: f64, s: f64, f: F, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t = {t} must be finite and non-negative")));
    }
    let k = k_const(sigma_sq);
    let u = t.cbrt();
    let integral = quadrature(
        |v: f64| {
            let h = f(v * v * v);
            k * v * v / (h * h)
        },
        0.0,
        u,
        1e-14,
        0.0,
    )?;
    Ok(f(t) - s - a * u + integral)
}

/// Picard iteration `h ← s + a u - K ∫_0^u v²/h² dv` on a uniform grid of
/// `n` intervals over `[0, u_small]`, with trapezoidal quadrature.
pub fn picard_profile(
    sigma_sq: f64,
    a: f64,
    s: f64,
    u_small: f64,
    n: usize,
    iterations: usize,
) -> Result<Vec<(f64, f64)>> {
    validate(sigma_sq, a, s, 1.0, 1e-6)?;
    if !(u_small > 0.0) || n < 2 {
        return Err(Error::domain("Picard interval must be non-empty"));
    }
    let k = k_const(sigma_sq);
    let du = u_small / n as f64;
    let us: Vec<f64> = (0..=n).map(|i| i as f64 * du).collect();
    let mut h: Vec<f64> = us.iter().map(|u| s + a * u).collect();
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut prev = 0.0;
        for (i, &u) in us.iter().enumerate() {
            if h[i] <= 0.0 {
                return Err(Error::NumericalFailure("Picard iterate left the positive half-line".into()));
            }
            let g = (u / h[i]).powi(2);
            if i > 0 {
                acc += 0.5 * du * (g + prev);
            }
            prev = g;
            next.push(s + a * u - k * acc);
        }
        h = next;
    }
    Ok(us.into_iter().zip(h).collect())
}
