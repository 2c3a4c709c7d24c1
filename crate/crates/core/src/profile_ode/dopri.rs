//! Dormand–Prince 5(4) for scalar ODEs, with the standard continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its dense-output polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub dx: f64,
    pub c: [f64; 5],
}

impl Segment {
    pub fn x1(&self) -> f64 {
        self.x0 + self.dx
    }
    pub fn y0(&self) -> f64 {
        self.c[0]
    }
    pub fn y1(&self) -> f64 {
        self.c[0] + self.c[1]
    }
    pub fn eval(&self, x: f64) -> f64 {
        let th = (x - self.x0) / self.dx;
        let th1 = 1.0 - th;
        let c = &self.c;
        c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])))
    }
}

pub enum Control {
    Continue,
    Stop,
}

pub struct Run {
    pub segments: Vec<Segment>,
    pub stopped: bool,
}

pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

pub const MAX_STEPS: usize = 2_000_000;

/// Integrates `y' = f(x, y)` from `(x0, y0)` toward `x_end`, calling
/// `on_step` after every accepted step with the step and `f(x1, y1)`.
pub fn integrate<F, E>(f: F, x0: f64, y0: f64, x_end: f64, h0: f64, tol: &Tolerance, mut on_step: E) -> Result<Run>
where
    F: Fn(f64, f64) -> f64,
    E: FnMut(&Segment, f64) -> Control,
{
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let mut h = h0.abs() * dir;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, y);
    let mut segments = Vec::new();
    let mut steps = 0usize;
    while (x_end - x) * dir > 0.0 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::ToleranceNotMet(format!("step budget exhausted at x = {x}")));
        }
        let last = (x + h - x_end) * dir >= 0.0;
        if last {
            h = x_end - x;
        }
        let k2 = f(x + C2 * h, y + h * A21 * k1);
        let k3 = f(x + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(x + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(x + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let x1 = if last { x_end } else { x + h };
        let k7 = f(x1, y1);
        let est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let sc = tol.atol + tol.rtol * y.abs().max(y1.abs());
        let err = (est / sc).abs();
        if err <= 1.0 && y1.is_finite() && k7.is_finite() {
            let ydiff = y1 - y;
            let bspl = h * k1 - ydiff;
            let seg = Segment {
                x0: x,
                dx: x1 - x,
                c: [
                    y,
                    ydiff,
                    bspl,
                    ydiff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ],
            };
            segments.push(seg);
            x = x1;
            y = y1;
            k1 = k7;
            if let Control::Stop = on_step(&seg, k7) {
                return Ok(Run { segments, stopped: true });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            h *= fac;
        }
        if h.abs() < 1e-14 * x.abs().max(1.0) {
            return Err(Error::ToleranceNotMet(format!("step size collapsed at x = {x}")));
        }
    }
    Ok(Run { segments, stopped: false })
}
