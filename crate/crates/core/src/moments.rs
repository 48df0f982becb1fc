//! First moments `M(t) = E X(t)` and their a-priori bound.
//!
//! `M` solves the forward linear system
//! `M_i(t) = x_i - ∫ M_i(s-) b_ii(ds) + ∫ M_j(s-) b̄_ji(ds)`.

use crate::cumulant::{SolveError, SolverOptions};
use crate::environment::{split_at, EnvSpec, SignedMeasure};
use crate::ode::{self, interpolate, Node, OdeOptions};
use crate::{other, Vec2};

/// `t -> E X(t)` on `[0, t]`, right-continuous at atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    /// Increasing; an atom time appears twice (left value, then right value).
    pub times: Vec<f64>,
    pub values: Vec<Vec2>,
    segments: Vec<Vec<Node>>,
}

impl MomentCurve {
    pub fn terminal(&self) -> Vec2 {
        *self.values.last().expect("curve is never empty")
    }

    /// `M(s)`, the post-atom value at atom times.
    pub fn value_at(&self, s: f64) -> Option<Vec2> {
        if let Some(k) = self.times.iter().rposition(|&x| x == s) {
            return Some(self.values[k]);
        }
        let seg = self
            .segments
            .iter()
            .find(|g| g.len() > 1 && g[0].t <= s && s <= g[g.len() - 1].t)?;
        let k = seg.partition_point(|n| n.t <= s).clamp(1, seg.len() - 1);
        Some(interpolate(&seg[k - 1], &seg[k], s))
    }
}

struct Drift {
    diag: [SignedMeasure; 2],
    cross: [SignedMeasure; 2],
}

impl Drift {
    fn new(env: &EnvSpec) -> Self {
        Drift {
            diag: [env.b[0][0].clone(), env.b[1][1].clone()],
            // cross[i] = b̄_ji, the inflow into type i
            cross: [env.bar_b(1, 0), env.bar_b(0, 1)],
        }
    }
}

/// `E_x X(s)` for `s ∈ [0, t]`.
pub fn first_moment(env: &EnvSpec, x0: Vec2, t: f64) -> Result<MomentCurve, SolveError> {
    first_moment_with(env, x0, t, &SolverOptions::default(), &[])
}

/// As [`first_moment`], with solver options and forced mesh points.
pub fn first_moment_with(
    env: &EnvSpec,
    x0: Vec2,
    t: f64,
    opts: &SolverOptions,
    stops: &[f64],
) -> Result<MomentCurve, SolveError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SolveError::Invalid(format!("need t >= 0, got {t}")));
    }
    let drift = Drift::new(env);
    let atoms = env.atom_times(0.0, t);
    let mut points: Vec<f64> = atoms
        .iter()
        .copied()
        .chain(env.breakpoints(0.0, t))
        .chain(stops.iter().copied().filter(|&s| s > 0.0 && s < t))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let ode_opts = OdeOptions {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        max_step: opts.max_step,
        max_steps: opts.max_steps,
    };
    let mut times = vec![0.0];
    let mut values = vec![x0];
    let mut segments = Vec::new();
    let mut m = x0;
    for (lo, hi) in split_at(0.0, t, &points) {
        if hi > lo {
            let diag = [0, 1].map(|i| drift.diag[i].density.piece_on(lo, hi));
            let cross = [0, 1].map(|i| drift.cross[i].density.piece_on(lo, hi));
            let rhs = |s: f64, y: Vec2| {
                [0, 1].map(|i| y[other(i)] * cross[i].at(s) - y[i] * diag[i].at(s))
            };
            let mut nodes = vec![Node::start(lo, m)];
            m = ode::integrate(rhs, lo, m, hi, &ode_opts, &mut nodes)?;
            for n in &nodes[1..] {
                times.push(n.t);
                values.push(n.y);
            }
            segments.push(nodes);
        }
        if atoms.binary_search_by(|a| a.total_cmp(&hi)).is_ok() {
            let left = m;
            m = [0, 1].map(|i| {
                let j = other(i);
                left[i] * (1.0 - drift.diag[i].atom_at(hi)) + left[j] * drift.cross[i].atom_at(hi)
            });
            times.push(hi);
            values.push(m);
        }
    }
    Ok(MomentCurve {
        times,
        values,
        segments,
    })
}

/// Gronwall-type bound on `E_x X(t)`, symmetrised over the type indices:
/// with `β = max_i ‖b_ii‖(t)` and `α = b̄_12(t) b̄_21(t) e^β + β`,
/// `E X_i(t) <= x_i e^α + x_j b̄_ji(t) e^{β+α}`.
pub fn moment_bound(env: &EnvSpec, x0: Vec2, t: f64) -> Vec2 {
    let beta = env.b[0][0]
        .total_variation(0.0, t)
        .max(env.b[1][1].total_variation(0.0, t));
    // bar[i] = b̄_ji(t)
    let bar = [
        env.bar_b(1, 0).mass_between(0.0, t),
        env.bar_b(0, 1).mass_between(0.0, t),
    ];
    let alpha = bar[0] * bar[1] * beta.exp() + beta;
    [0, 1].map(|i| x0[i] * alpha.exp() + x0[other(i)] * bar[i] * (beta + alpha).exp())
}
