//! Dormand–Prince 5(4) for two-dimensional systems, in either time
//! direction, with its fourth-order continuous extension as dense output.

use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("nonconvergent-step: step size underflow at s={at} (h={step:e})")]
    StepUnderflow { at: f64, step: f64 },
    #[error("nonconvergent-step: step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at s={0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            max_steps: 1_000_000,
        }
    }
}

/// An accepted node. `dense` holds the continuous-extension coefficients
/// of the step that ended here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub y: Vec2,
    pub dense: [Vec2; 4],
}

impl Node {
    pub fn start(t: f64, y: Vec2) -> Self {
        Node {
            t,
            y,
            dense: [[0.0; 2]; 4],
        }
    }
}

/// Dense output at `t` between consecutive nodes `a` and `b`.
pub fn interpolate(a: &Node, b: &Node, t: f64) -> Vec2 {
    let h = b.t - a.t;
    if h == 0.0 {
        return b.y;
    }
    let th = (t - a.t) / h;
    let th1 = 1.0 - th;
    let [r2, r3, r4, r5] = b.dense;
    [0, 1].map(|m| a.y[m] + th * (r2[m] + th1 * (r3[m] + th * (r4[m] + th1 * r5[m]))))
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction) and
/// append every accepted node after the start to `out`.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: Vec2,
    t1: f64,
    opts: &OdeOptions,
    out: &mut Vec<Node>,
) -> Result<Vec2, OdeError>
where
    F: FnMut(f64, Vec2) -> Vec2,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; 2]; 7];
    k[0] = f(t, y);
    let mut h = span.abs().min(opts.max_step).min(1e-2) * dir;
    let mut steps = 0;

    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        steps += 1;
        let remaining = t1 - t;
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }

        for s in 1..7 {
            let mut ys = y;
            for (m, ym) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[r][m];
                }
                *ym += h * acc;
            }
            k[s] = f(t + C[s] * h, ys);
        }
        let mut y_new = y;
        let mut err = 0.0;
        for m in 0..2 {
            let mut acc = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                acc += B[s] * k[s][m];
                e += E[s] * k[s][m];
            }
            y_new[m] = y[m] + h * acc;
            let scale = opts.abs_tol + opts.rel_tol * y[m].abs().max(y_new[m].abs());
            err += (h * e / scale).powi(2);
        }
        let err = (err / 2.0).sqrt();

        if !err.is_finite() {
            h *= 0.2;
        } else if err <= 1.0 {
            let mut dense = [[0.0; 2]; 4];
            for m in 0..2 {
                let diff = y_new[m] - y[m];
                let bspl = h * k[0][m] - diff;
                dense[0][m] = diff;
                dense[1][m] = bspl;
                dense[2][m] = diff - h * k[6][m] - bspl;
                dense[3][m] = h * (0..7).map(|s| D[s] * k[s][m]).sum::<f64>();
            }
            t = if last { t1 } else { t + h };
            y = y_new;
            k[0] = k[6];
            if !y.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite(t));
            }
            out.push(Node { t, y, dense });
            if last {
                return Ok(y);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).abs().min(opts.max_step) * dir;
            continue;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h.abs() < 8.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { at: t, step: h });
        }
    }
}
