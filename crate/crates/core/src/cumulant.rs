//! Backward cumulant system `v_{r,t}(λ)`.
//!
//! Between atoms `v` solves `dv_i/dr = -F_i(r, v)` with
//! `F_i = v_j b_ij' - v_i b_ii' - c_i' v_i^2 - Σ ṁ ∫K_i(v, z) ν(dz)`.
//! At an atom `s` the left value is given in closed form by [`atom_step`].
//! Atoms at `t` are part of `v_{r,t}` for `r < t`; atoms at `r` are not.

use thiserror::Error;

use crate::environment::{AtomEvent, EnvSpec, KernelError, SignedMeasure};
use crate::ode::{self, interpolate, Node, OdeError, OdeOptions};
use crate::{dot, other, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("negative-value: v_{component} = {value:e} at r = {at}")]
    NegativeValue {
        component: usize,
        at: f64,
        value: f64,
    },
    #[error("negative-left-value: v_{component}(s-) = {value:e} at atom s = {at}")]
    NegativeLeftValue {
        component: usize,
        at: f64,
        value: f64,
    },
    #[error("ladder-not-converged: component {component} is neither clearly finite nor divergent")]
    LadderNotConverged { component: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.05,
            max_steps: 1_000_000,
        }
    }
}

impl SolverOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 {
            Ok(())
        } else {
            Err(SolveError::Invalid("tolerances and max_step must be positive".into()))
        }
    }
}

/// One mesh point of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub r: f64,
    /// `v_{r,t}`
    pub value: Vec2,
    /// `v_{r-,t}`; equal to `value` off atoms.
    pub left: Vec2,
    pub is_atom: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    hi: f64,
    lo: f64,
    nodes: Vec<Node>,
}

/// `r -> v_{r,t}(λ)` on `[r0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSolution {
    pub t: f64,
    pub r: f64,
    pub lambda: Vec2,
    /// Strictly decreasing in `r`, starting at `t`.
    pub grid: Vec<GridPoint>,
    segments: Vec<Segment>,
}

impl CumulantSolution {
    /// `v_{r0,t}(λ)`.
    pub fn value(&self) -> Vec2 {
        self.grid.last().expect("grid is never empty").value
    }

    /// `v_{s,t}(λ)` for `s ∈ [r0, t]`.
    pub fn value_at(&self, s: f64) -> Option<Vec2> {
        if s == self.t {
            return Some(self.lambda);
        }
        let seg = self.segments.iter().find(|g| g.lo <= s && s < g.hi)?;
        let k = seg.nodes.partition_point(|n| n.t > s);
        if k == 0 {
            return Some(seg.nodes[0].y);
        }
        if k == seg.nodes.len() {
            return Some(seg.nodes[k - 1].y);
        }
        Some(interpolate(&seg.nodes[k - 1], &seg.nodes[k], s))
    }

    /// `v_{s-,t}(λ)`.
    pub fn left_at(&self, s: f64) -> Option<Vec2> {
        match self.grid.iter().find(|p| p.r == s && p.is_atom) {
            Some(p) => Some(p.left),
            None => self.value_at(s),
        }
    }

    pub fn atom_times(&self) -> Vec<f64> {
        self.grid.iter().filter(|p| p.is_atom).map(|p| p.r).collect()
    }
}

/// A backward system between atoms plus its atom map.
pub(crate) trait BackwardSystem {
    /// Atom times in `(r, t]`, increasing.
    fn atom_times(&self, r: f64, t: f64) -> Vec<f64>;
    /// Breakpoints strictly inside `(r, t)`.
    fn breakpoints(&self, r: f64, t: f64) -> Vec<f64>;
    /// `F(s, v)` on the segment `(lo, hi)`; `dv/dr = -F`.
    fn rate<'a>(&'a self, lo: f64, hi: f64) -> Box<dyn Fn(f64, Vec2) -> Vec2 + 'a>;
    /// Left value at an atom from the right value.
    fn atom(&self, s: f64, right: Vec2) -> Result<Vec2, SolveError>;
}

pub(crate) fn solve_system<S: BackwardSystem + ?Sized>(
    sys: &S,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
    extra_stops: &[f64],
) -> Result<CumulantSolution, SolveError> {
    opts.validate()?;
    if !(r <= t) || !r.is_finite() || !t.is_finite() {
        return Err(SolveError::Invalid(format!("need r <= t, got r={r}, t={t}")));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(SolveError::Invalid(format!("lambda must be >= 0, got {lambda:?}")));
    }
    let atoms = sys.atom_times(r, t);
    let is_atom = |s: f64| atoms.binary_search_by(|a| a.total_cmp(&s)).is_ok();

    let mut stops: Vec<f64> = atoms
        .iter()
        .copied()
        .chain(sys.breakpoints(r, t))
        .chain(extra_stops.iter().copied())
        .filter(|&s| s > r && s < t)
        .collect();
    stops.sort_by(|a, b| b.total_cmp(a));
    stops.dedup();
    stops.push(r);

    let scale = lambda[0].max(lambda[1]).max(1.0);
    let neg_tol = 10.0 * (opts.abs_tol + opts.rel_tol * scale);
    let ode_opts = opts.ode();

    let mut grid = Vec::new();
    let mut segments = Vec::new();
    let mut v = lambda;
    if r == t {
        grid.push(GridPoint {
            r: t,
            value: v,
            left: v,
            is_atom: false,
        });
        return Ok(CumulantSolution {
            t,
            r,
            lambda,
            grid,
            segments,
        });
    }
    let top_atom = is_atom(t);
    let left = if top_atom { sys.atom(t, v)? } else { v };
    grid.push(GridPoint {
        r: t,
        value: v,
        left,
        is_atom: top_atom,
    });
    v = left;

    let mut hi = t;
    for lo in stops {
        if lo >= hi {
            continue;
        }
        let rate = sys.rate(lo, hi);
        let rhs = |s: f64, y: Vec2| {
            let f = rate(s, y);
            [-f[0], -f[1]]
        };
        let mut nodes = vec![Node::start(hi, v)];
        let mut right = ode::integrate(rhs, hi, v, lo, &ode_opts, &mut nodes)?;
        for node in nodes.iter_mut().skip(1) {
            for (k, y) in node.y.iter_mut().enumerate() {
                if *y < -neg_tol {
                    return Err(SolveError::NegativeValue {
                        component: k + 1,
                        at: node.t,
                        value: *y,
                    });
                }
                *y = y.max(0.0);
            }
        }
        for y in right.iter_mut() {
            *y = y.max(0.0);
        }
        for n in &nodes[1..nodes.len() - 1] {
            grid.push(GridPoint {
                r: n.t,
                value: n.y,
                left: n.y,
                is_atom: false,
            });
        }
        let atom_here = lo > r && is_atom(lo);
        let left = if atom_here { sys.atom(lo, right)? } else { right };
        grid.push(GridPoint {
            r: lo,
            value: right,
            left,
            is_atom: atom_here,
        });
        segments.push(Segment { hi, lo, nodes });
        v = left;
        hi = lo;
    }

    Ok(CumulantSolution {
        t,
        r,
        lambda,
        grid,
        segments,
    })
}

/// Left value at an atom event from the right value `v`:
/// `v_i(1 - δ_i) + v_j Δb_ij + ∫ (1 - e^{-<v,z>}) m_i({s}, dz)`.
pub(crate) fn apply_atom(ev: &AtomEvent, v: Vec2) -> Result<Vec2, SolveError> {
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let j = other(i);
        *o = v[i] * (1.0 - ev.delta(i)) + v[j] * ev.b[i][j] + ev.m[i].laplace_deficit(v)?;
        let tol = 1e-12 * (v[0] + v[1]);
        if *o < -tol {
            return Err(SolveError::NegativeLeftValue {
                component: i + 1,
                at: ev.time,
                value: *o,
            });
        }
        *o = o.max(0.0);
    }
    Ok(out)
}

/// `v_{s-,t}` from `v_{s,t}` at an environment atom `s` (identity off atoms).
pub fn atom_step(env: &EnvSpec, s: f64, v_right: Vec2) -> Result<Vec2, SolveError> {
    apply_atom(&env.atom_event(s), v_right)
}

pub(crate) fn check_kernels(env: &EnvSpec) -> Result<(), SolveError> {
    for i in 0..2 {
        for d in &env.m[i].density_components {
            d.measure.k_integral(i, [0.0, 0.0])?;
        }
    }
    Ok(())
}

struct Cumulant<'a>(&'a EnvSpec);

impl BackwardSystem for Cumulant<'_> {
    fn atom_times(&self, r: f64, t: f64) -> Vec<f64> {
        self.0.atom_times(r, t)
    }

    fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        self.0.breakpoints(r, t)
    }

    fn rate<'a>(&'a self, lo: f64, hi: f64) -> Box<dyn Fn(f64, Vec2) -> Vec2 + 'a> {
        let coeffs = self.0.coefficients_on(lo, hi);
        Box::new(move |s, v| coeffs.cumulant_rate(s, v).unwrap_or([f64::NAN; 2]))
    }

    fn atom(&self, s: f64, right: Vec2) -> Result<Vec2, SolveError> {
        atom_step(self.0, s, right)
    }
}

/// `v_{r,t}(λ)` for `r ∈ [0, t]`.
pub fn solve_backward(
    env: &EnvSpec,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<CumulantSolution, SolveError> {
    solve_backward_on(env, 0.0, t, lambda, opts)
}

/// `v_{s,t}(λ)` for `s ∈ [r, t]`.
pub fn solve_backward_on(
    env: &EnvSpec,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<CumulantSolution, SolveError> {
    solve_backward_with_stops(env, r, t, lambda, opts, &[])
}

/// As [`solve_backward_on`], forcing mesh points at `stops`.
pub fn solve_backward_with_stops(
    env: &EnvSpec,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
    stops: &[f64],
) -> Result<CumulantSolution, SolveError> {
    check_kernels(env)?;
    solve_system(&Cumulant(env), r, t, lambda, opts, stops)
}

/// `E_x exp(-<λ, X(t)>)` given `X(r) = x`.
pub fn laplace_transform(
    env: &EnvSpec,
    x: Vec2,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<f64, SolveError> {
    if x == [0.0, 0.0] || lambda == [0.0, 0.0] {
        return Ok(1.0);
    }
    let v = solve_backward_on(env, r, t, lambda, opts)?.value();
    Ok((-dot(x, v)).exp())
}

/// `|v_{r,t}(λ) - v_{r,s}(v_{s,t}(λ))|` componentwise.
pub fn semigroup_check(
    env: &EnvSpec,
    r: f64,
    s: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<Vec2, SolveError> {
    if !(r <= s && s <= t) {
        return Err(SolveError::Invalid(format!("need r <= s <= t, got {r}, {s}, {t}")));
    }
    let direct = solve_backward_on(env, r, t, lambda, opts)?.value();
    let inner = solve_backward_on(env, s, t, lambda, opts)?.value();
    let composed = solve_backward_on(env, r, s, inner, opts)?.value();
    Ok([
        (direct[0] - composed[0]).abs(),
        (direct[1] - composed[1]).abs(),
    ])
}

struct LinearEnvelope<'a> {
    env: &'a EnvSpec,
    bar: [SignedMeasure; 2],
}

impl BackwardSystem for LinearEnvelope<'_> {
    fn atom_times(&self, r: f64, t: f64) -> Vec<f64> {
        self.env.atom_times(r, t)
    }

    fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        self.env.breakpoints(r, t)
    }

    fn rate<'a>(&'a self, lo: f64, hi: f64) -> Box<dyn Fn(f64, Vec2) -> Vec2 + 'a> {
        let diag = [0, 1].map(|i| self.env.b[i][i].density.piece_on(lo, hi));
        let cross = [0, 1].map(|i| self.bar[i].density.piece_on(lo, hi));
        Box::new(move |s, v| {
            [0, 1].map(|i| v[other(i)] * cross[i].at(s) - v[i] * diag[i].at(s))
        })
    }

    fn atom(&self, s: f64, v: Vec2) -> Result<Vec2, SolveError> {
        Ok([0, 1].map(|i| {
            let j = other(i);
            (v[i] * (1.0 - self.env.b[i][i].atom_at(s)) + v[j] * self.bar[i].atom_at(s)).max(0.0)
        }))
    }
}

/// Solution of the linear system obtained by dropping the diffusion and
/// the compensated jump exponent; an upper bound for `v_{r,t}(λ)`.
pub fn linear_envelope(
    env: &EnvSpec,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<Vec2, SolveError> {
    let sys = LinearEnvelope {
        env,
        bar: [env.bar_b(0, 1), env.bar_b(1, 0)],
    };
    Ok(solve_system(&sys, r, t, lambda, opts, &[])?.value())
}

/// Limit of one cumulant component along the ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Finite(f64),
    Infinite,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderDiagnostic {
    pub limit: [Limit; 2],
    /// `(multiplier, v_{0,t}(multiplier * (1,1)))` for every rung solved.
    pub rungs: Vec<(f64, Vec2)>,
    /// False if some component decreased along the ladder.
    pub monotone: bool,
}

/// `λ = (2^k, 2^k)` for `k = 0..=40`.
pub fn default_ladder() -> Vec<f64> {
    (0..=40).map(|k| 2f64.powi(k)).collect()
}

fn classify(seq: &[f64]) -> Limit {
    let n = seq.len();
    if n < 3 {
        return Limit::Ambiguous;
    }
    let last = seq[n - 1];
    if last > 1e15 {
        return Limit::Infinite;
    }
    if seq[n - 3..].windows(2).all(|w| w[1] >= 1.5 * w[0] && w[0] > 0.0) {
        return Limit::Infinite;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()) + 1e-300;
    if close(seq[n - 1], seq[n - 2]) && close(seq[n - 2], seq[n - 3]) {
        return Limit::Finite(last);
    }
    Limit::Ambiguous
}

/// `v_{0,t}(∞)` by a geometric ladder with Cauchy stopping.
pub fn v_infinity(
    env: &EnvSpec,
    t: f64,
    ladder: &[f64],
    opts: &SolverOptions,
) -> Result<LadderDiagnostic, SolveError> {
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::Invalid("ladder must be strictly increasing".into()));
    }
    let mut rungs: Vec<(f64, Vec2)> = Vec::new();
    let mut limit = [Limit::Ambiguous; 2];
    for &k in ladder {
        let v = match solve_backward(env, t, [k, k], opts) {
            Ok(sol) => sol.value(),
            // past the resolvable range; decide on the rungs so far
            Err(SolveError::Ode(_)) if rungs.len() >= 3 => break,
            Err(e) => return Err(e),
        };
        rungs.push((k, v));
        for (i, l) in limit.iter_mut().enumerate() {
            let seq: Vec<f64> = rungs.iter().map(|(_, v)| v[i]).collect();
            *l = classify(&seq);
        }
        if limit.iter().all(|l| *l != Limit::Ambiguous) {
            break;
        }
    }
    let monotone = rungs.windows(2).all(|w| {
        (0..2).all(|i| w[1].1[i] >= w[0].1[i] - 1e-9 * w[0].1[i].abs().max(1e-12))
    });
    Ok(LadderDiagnostic {
        limit,
        rungs,
        monotone,
    })
}

/// `P_x(τ_0 <= t) = exp(-<x, v_{0,t}(∞)>)`.
pub fn extinction_prob(
    env: &EnvSpec,
    x: Vec2,
    t: f64,
    opts: &SolverOptions,
) -> Result<f64, SolveError> {
    if x == [0.0, 0.0] {
        return Ok(1.0);
    }
    let diag = v_infinity(env, t, &default_ladder(), opts)?;
    let mut exponent = 0.0;
    for i in 0..2 {
        if x[i] == 0.0 {
            continue;
        }
        match diag.limit[i] {
            Limit::Finite(v) => exponent += x[i] * v,
            Limit::Infinite => return Ok(0.0),
            Limit::Ambiguous => return Err(SolveError::LadderNotConverged { component: i + 1 }),
        }
    }
    Ok((-exponent).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{AtomJump, Component, SpatialMeasure};

    fn feller() -> EnvSpec {
        let mut env = EnvSpec::zero(1.0);
        env.b[0][0] = SignedMeasure::constant(1.0);
        env.c[0] = SignedMeasure::constant(0.5);
        env
    }

    #[test]
    fn feller_matches_riccati_closed_form() {
        let sol = solve_backward(&feller(), 1.0, [2.0, 0.0], &SolverOptions::default()).unwrap();
        let e = (-1.0f64).exp();
        let exact = 2.0 * e / (1.0 + (1.0 - e));
        assert!((sol.value()[0] - exact).abs() < 1e-9 * exact);
        assert_eq!(sol.value()[1], 0.0);
        assert_eq!(sol.grid[0].value, [2.0, 0.0]);
        let mid = sol.value_at(0.5).unwrap()[0];
        let e5 = (-0.5f64).exp();
        let exact_mid = 2.0 * e5 / (1.0 + (1.0 - e5));
        assert!((mid - exact_mid).abs() < 1e-8);
    }

    #[test]
    fn atom_step_hand_values() {
        let mut env = EnvSpec::zero(1.0);
        env.m[0].atoms.push(AtomJump {
            time: 0.5,
            measure: SpatialMeasure::single(Component::dirac(0.4, [1.0, 0.0])),
        });
        let left = atom_step(&env, 0.5, [1.0, 0.0]).unwrap();
        assert!((left[0] - (1.0 - 0.4 * (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(atom_step(&env, 0.3, [1.0, 2.0]).unwrap(), [1.0, 2.0]);
    }

    #[test]
    fn bottleneck_annihilates() {
        let mut env = EnvSpec::zero(1.0);
        env.b[0][0] = SignedMeasure::zero().with_atoms(&[(0.5, 1.0)]);
        let sol = solve_backward(&env, 1.0, [3.0, 1.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.value(), [0.0, 1.0]);
        assert_eq!(sol.value_at(0.7).unwrap(), [3.0, 1.0]);
        assert_eq!(sol.value_at(0.5).unwrap(), [3.0, 1.0]);
        assert_eq!(sol.left_at(0.5).unwrap(), [0.0, 1.0]);
        assert_eq!(sol.value_at(0.2).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn ladder_on_feller() {
        let diag = v_infinity(&feller(), 1.0, &default_ladder(), &SolverOptions::default()).unwrap();
        let exact = 1.0 / (0.5 * (1.0f64.exp() - 1.0));
        match diag.limit[0] {
            Limit::Finite(v) => assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(diag.limit[1], Limit::Infinite);
        assert!(diag.monotone);
    }

    #[test]
    fn zero_env_never_dies() {
        let env = EnvSpec::zero(1.0);
        let o = SolverOptions::default();
        assert_eq!(extinction_prob(&env, [1.0, 0.0], 1.0, &o).unwrap(), 0.0);
        assert_eq!(extinction_prob(&env, [0.0, 0.0], 1.0, &o).unwrap(), 1.0);
    }
}
