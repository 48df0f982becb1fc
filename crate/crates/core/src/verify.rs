//! Named, seeded cross-check scenarios with statistical gates.
//!
//! [`run_scenario`] executes, in order: environment validation, the
//! cumulant solve with the flow-property grid, first moments against the
//! ensemble mean, the Laplace-transform grid, the comparison gate, the
//! truncation gate, the extinction gate (when the `λ → ∞` ladder settles)
//! and the functional gates (when a weight measure is present). Failures
//! of any kind become red checks; nothing here panics on bad statistics.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::LoadedConfig;
use crate::cumulant::{
    self, default_ladder, semigroup_check, solve_backward_on, v_infinity, Limit, SolverOptions,
};
use crate::environment::{
    AtomJump, Component, Density, DensityJump, EnvSpec, SignedMeasure, SpatialMeasure,
};
use crate::functionals::{mc_functional, solve_functional, solve_w, WeightMeasure};
use crate::moments::{first_moment, moment_bound};
use crate::simulate::{
    coupled_pair, extinction_frequency, simulate_ensemble, truncate_large_jumps, EnsembleStats,
    NoiseStream, SimOptions, SmallJumpMode,
};
use crate::stats::Estimate;
use crate::{dot, Vec2};

/// Gate thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Per-cell z-score bound for Monte Carlo against analytic values.
    pub z_cell: f64,
    /// Fraction of cells of a grid that must pass `z_cell`.
    pub cell_fraction: f64,
    /// No cell may exceed this z-score.
    pub z_cap: f64,
    /// z-score bound for ensemble means against first moments.
    pub z_moment: f64,
    /// z-score bound for extinction frequencies.
    pub z_extinction: f64,
    /// Bound on flow-property residuals.
    pub semigroup_tol: f64,
    /// Bound on deterministic identities (reductions, terminal atoms, truncation order).
    pub identity_tol: f64,
    /// Smallest standard error used in a z-score.
    pub se_floor: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            z_cell: 3.5,
            cell_fraction: 0.95,
            z_cap: 6.0,
            z_moment: 4.0,
            z_extinction: 4.0,
            semigroup_tol: 1e-6,
            identity_tol: 1e-8,
            se_floor: 1e-8,
        }
    }
}

impl Gates {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.z_cell,
            self.cell_fraction,
            self.z_cap,
            self.z_moment,
            self.z_extinction,
            self.semigroup_tol,
            self.identity_tol,
            self.se_floor,
        ];
        if all.iter().all(|g| g.is_finite() && *g > 0.0) && self.cell_fraction <= 1.0 {
            Ok(())
        } else {
            Err("gates must be positive and the cell fraction at most 1".into())
        }
    }
}

/// Coupled comparison of `x0` against a larger start.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub x0_high: Vec2,
    /// Coupled pairs for diffusion-free environments.
    pub pairs: usize,
}

/// Extinction refinement: the frequency bias at `steps[1]` must not exceed
/// the bias at the coarser `steps[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub steps: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub env: EnvSpec,
    pub zeta: Option<WeightMeasure>,
    pub x0: Vec2,
    pub t: f64,
    pub checkpoints: Vec<f64>,
    pub lambda_grid: Vec<Vec2>,
    pub n_paths: usize,
    pub seed: u64,
    pub sim: SimOptions,
    pub solver: SolverOptions,
    pub gates: Gates,
    pub comparison: Option<Comparison>,
    /// Truncation levels, increasing; empty skips the gate.
    pub truncation: Vec<f64>,
    pub refinement: Option<Refinement>,
}

impl Scenario {
    /// A scenario with default grids and options.
    pub fn new(name: &str, env: EnvSpec, x0: Vec2) -> Self {
        let t = env.horizon.min(1.0);
        Scenario {
            name: name.into(),
            env,
            zeta: None,
            x0,
            t,
            checkpoints: vec![t / 3.0, 2.0 * t / 3.0, t],
            lambda_grid: vec![[0.5, 0.5], [1.0, 0.0], [0.0, 1.0], [2.0, 1.0]],
            n_paths: 100_000,
            seed: 1,
            sim: SimOptions {
                step: 1e-4,
                ..SimOptions::default()
            },
            solver: SolverOptions::default(),
            gates: Gates::default(),
            comparison: None,
            truncation: Vec::new(),
            refinement: None,
        }
    }

    /// A scenario from a config file; `fallback` names it when the run
    /// section does not. Unset fields keep the defaults of [`Scenario::new`]
    /// with `x0 = (1, 1)`.
    pub fn from_config(cfg: &LoadedConfig, fallback: &str) -> Self {
        let run = &cfg.run;
        let name = run.name.as_deref().unwrap_or(fallback);
        let mut sc = Scenario::new(name, cfg.env.clone(), run.x0.unwrap_or([1.0, 1.0]));
        sc.zeta = cfg.zeta.clone();
        if let Some(t) = run.t {
            sc.t = t;
            sc.checkpoints = vec![t / 3.0, 2.0 * t / 3.0, t];
        }
        if let Some(c) = &run.checkpoints {
            sc.checkpoints = c.clone();
        }
        if let Some(g) = &run.lambda_grid {
            sc.lambda_grid = g.clone();
        }
        if let Some(n) = run.paths {
            sc.n_paths = n;
        }
        if let Some(s) = run.seed {
            sc.seed = s;
        }
        if let Some(h) = run.step {
            sc.sim.step = h;
        }
        if let Some(e) = run.epsilon {
            sc.sim.epsilon = e;
        }
        if let Some(m) = run.small_jumps {
            sc.sim.small_jumps = m;
        }
        if let Some(v) = &cfg.verify {
            sc.gates = v.gates;
            sc.comparison = v.x0_high.map(|x0_high| Comparison {
                x0_high,
                pairs: v.pairs.unwrap_or(1000),
            });
            sc.truncation = v.truncation.clone();
            sc.refinement = v.refinement.map(|steps| Refinement { steps });
        }
        sc
    }

    fn check_inputs(&self) -> Result<(), String> {
        self.gates.validate()?;
        if !(self.t > 0.0 && self.t <= self.env.horizon) {
            return Err(format!("run time {} outside (0, horizon]", self.t));
        }
        if self.checkpoints.iter().any(|&s| !(s > 0.0 && s <= self.t)) {
            return Err("checkpoints must lie in (0, t]".into());
        }
        if self.x0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err("x0 must be finite and nonnegative".into());
        }
        if self.lambda_grid.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err("lambda grid must be finite and nonnegative".into());
        }
        if self.n_paths < 2 {
            return Err("need at least 2 paths".into());
        }
        Ok(())
    }
}

fn nullable<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// One gate outcome. A non-finite statistic (serialized as `null`) marks a
/// gate that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nullable")]
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerdictReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reports as a JSON array, in the given order.
pub fn reports_to_json(reports: &[VerdictReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

struct Recorder {
    checks: Vec<Check>,
    clock: Instant,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            checks: Vec::new(),
            clock: Instant::now(),
        }
    }

    fn push(&mut self, name: &str, statistic: f64, threshold: f64, pass: bool) {
        let runtime = self.clock.elapsed();
        self.clock = Instant::now();
        self.checks.push(Check {
            name: name.into(),
            statistic,
            threshold,
            pass: pass && !statistic.is_nan(),
            error: None,
            runtime,
        });
    }

    /// `statistic <= threshold`.
    fn at_most(&mut self, name: &str, statistic: f64, threshold: f64) {
        self.push(name, statistic, threshold, statistic <= threshold);
    }

    fn at_least(&mut self, name: &str, statistic: f64, threshold: f64) {
        self.push(name, statistic, threshold, statistic >= threshold);
    }

    fn failed(&mut self, name: &str, threshold: f64, err: impl ToString) {
        self.push(name, f64::NAN, threshold, false);
        self.checks.last_mut().expect("just pushed").error = Some(err.to_string());
    }
}

/// Mix a scenario seed with a purpose index.
fn seed_for(seed: u64, purpose: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15)).random()
}

/// Fraction of cells with `z <= z_cell` and the largest `z`.
fn grade(z: &[f64], gates: &Gates) -> (f64, f64) {
    if z.is_empty() {
        return (1.0, 0.0);
    }
    let ok = z.iter().filter(|&&v| v <= gates.z_cell).count();
    let max = z.iter().copied().fold(0.0, f64::max);
    (ok as f64 / z.len() as f64, max)
}

fn grid_gate(rec: &mut Recorder, prefix: &str, z: &[f64], gates: &Gates) {
    let (frac, max) = grade(z, gates);
    rec.at_least(&format!("{prefix}-cell-fraction"), frac, gates.cell_fraction);
    rec.at_most(&format!("{prefix}-max-z"), max, gates.z_cap);
}

/// Run every gate of `sc` and collect the verdicts.
pub fn run_scenario(sc: &Scenario) -> VerdictReport {
    let mut rec = Recorder::new();
    let g = sc.gates;

    let report = sc.env.validate();
    rec.at_most("env-validation", report.violations.len() as f64, 0.0);
    if !report.pass() {
        rec.checks.last_mut().expect("just pushed").error = Some(report.to_string());
        return finish(sc, rec);
    }
    if let Err(e) = sc.check_inputs() {
        rec.failed("scenario-inputs", 0.0, e);
        return finish(sc, rec);
    }

    // Cumulant solve and flow property
    let mut analytic = Vec::with_capacity(sc.lambda_grid.len());
    for &lambda in &sc.lambda_grid {
        let per_t: Result<Vec<Vec2>, _> = sc
            .checkpoints
            .iter()
            .map(|&s| solve_backward_on(&sc.env, 0.0, s, lambda, &sc.solver).map(|v| v.value()))
            .collect();
        match per_t {
            Ok(v) => analytic.push(v),
            Err(e) => {
                rec.failed("cumulant-solve", 0.0, e);
                return finish(sc, rec);
            }
        }
    }
    rec.at_most("cumulant-solve", 0.0, 0.0);
    match flow_residual(sc) {
        Ok(r) => rec.at_most("semigroup-residual", r, g.semigroup_tol),
        Err(e) => rec.failed("semigroup-residual", g.semigroup_tol, e),
    }

    // Ensemble
    let noise = NoiseStream::new(seed_for(sc.seed, 1));
    let stats = match simulate_ensemble(
        &sc.env,
        sc.x0,
        sc.t,
        &sc.checkpoints,
        &sc.lambda_grid,
        sc.n_paths,
        &sc.sim,
        &noise,
    ) {
        Ok(s) => Some(s),
        Err(e) => {
            rec.failed("ensemble", 0.0, e);
            None
        }
    };

    match first_moment(&sc.env, sc.x0, sc.t) {
        Ok(curve) => {
            let bound_gap = sc
                .checkpoints
                .iter()
                .map(|&s| {
                    let m = curve.value_at(s).unwrap_or([f64::NAN; 2]);
                    let b = moment_bound(&sc.env, sc.x0, s);
                    (b[0] - m[0]).min(b[1] - m[1])
                })
                .fold(f64::INFINITY, f64::min);
            let slack = -g.identity_tol * (1.0 + curve.terminal().iter().sum::<f64>());
            rec.at_least("moment-bound-gap", bound_gap, slack);
            if let Some(stats) = &stats {
                let z: Vec<f64> = stats
                    .checkpoints
                    .iter()
                    .flat_map(|cp| {
                        let m = curve.value_at(cp.t).unwrap_or([f64::NAN; 2]);
                        [0, 1].map(|i| cp.mean[i].z_score(m[i], g.se_floor))
                    })
                    .collect();
                let max = z.iter().copied().fold(0.0, f64::max);
                rec.at_most("moment-max-z", max, g.z_moment);
            }
        }
        Err(e) => rec.failed("moment-bound-gap", 0.0, e),
    }

    if let Some(stats) = &stats {
        let z: Vec<f64> = laplace_cells(sc, stats, &analytic)
            .into_iter()
            .map(|(est, exact)| est.z_score(exact, g.se_floor))
            .collect();
        grid_gate(&mut rec, "laplace", &z, &g);
    }

    if let Some(cmp) = &sc.comparison {
        comparison_gate(sc, cmp, stats.as_ref(), &mut rec);
    }

    if !sc.truncation.is_empty() {
        truncation_gate(sc, &mut rec);
    }

    extinction_gate(sc, stats.as_ref(), &mut rec);

    if let Some(zeta) = &sc.zeta {
        functional_gate(sc, zeta, &mut rec);
    }

    finish(sc, rec)
}

fn finish(sc: &Scenario, rec: Recorder) -> VerdictReport {
    let pass = rec.checks.iter().all(|c| c.pass);
    VerdictReport {
        scenario: sc.name.clone(),
        checks: rec.checks,
        pass,
    }
}

/// Largest flow-property residual on a 5×5 `(r, s)` grid for every `λ`.
fn flow_residual(sc: &Scenario) -> Result<f64, cumulant::SolveError> {
    let t = sc.t;
    let mut worst: f64 = 0.0;
    for a in 0..5 {
        let r = t * a as f64 / 5.0;
        for b in 0..5 {
            let s = r + (t - r) * b as f64 / 4.0;
            for &lambda in &sc.lambda_grid {
                let res = semigroup_check(&sc.env, r, s, t, lambda, &sc.solver)?;
                worst = worst.max(res[0]).max(res[1]);
            }
        }
    }
    Ok(worst)
}

/// `(estimate, exp(-<x0, v_{0,s}(λ)>))` per `(λ, checkpoint)` cell.
fn laplace_cells(sc: &Scenario, stats: &EnsembleStats, analytic: &[Vec<Vec2>]) -> Vec<(Estimate, f64)> {
    let mut out = Vec::new();
    for (l, per_t) in analytic.iter().enumerate() {
        for (k, v) in per_t.iter().enumerate() {
            let est = stats.checkpoints[k].laplace[l].estimate;
            out.push((est, (-dot(sc.x0, *v)).exp()));
        }
    }
    out
}

fn comparison_gate(sc: &Scenario, cmp: &Comparison, low: Option<&EnsembleStats>, rec: &mut Recorder) {
    let g = sc.gates;
    if !sc.env.has_diffusion() {
        let opts = SimOptions {
            small_jumps: SmallJumpMode::DropMartingale,
            ..sc.sim
        };
        let noise = NoiseStream::new(seed_for(sc.seed, 2));
        let violations: Result<Vec<usize>, _> = (0..cmp.pairs as u64)
            .into_par_iter()
            .map(|id| {
                coupled_pair(&sc.env, sc.x0, cmp.x0_high, sc.t, &opts, &noise, id)
                    .map(|p| p.order_violations)
            })
            .collect();
        match violations {
            Ok(v) => rec.at_most("comparison-order-violations", v.iter().sum::<usize>() as f64, 0.0),
            Err(e) => rec.failed("comparison-order-violations", 0.0, e),
        }
        return;
    }
    let Some(low) = low else {
        rec.failed("comparison-laplace-max-z", g.z_cell, "no base ensemble");
        return;
    };
    let noise = NoiseStream::new(seed_for(sc.seed, 3));
    let high = simulate_ensemble(
        &sc.env,
        cmp.x0_high,
        sc.t,
        &sc.checkpoints,
        &sc.lambda_grid,
        sc.n_paths,
        &sc.sim,
        &noise,
    );
    match high {
        Ok(high) => {
            let mut worst: f64 = 0.0;
            for (cl, ch) in low.checkpoints.iter().zip(&high.checkpoints) {
                for (el, eh) in cl.laplace.iter().zip(&ch.laplace) {
                    let (a, b) = (el.estimate, eh.estimate);
                    let pooled = (a.se * a.se + b.se * b.se).sqrt().max(g.se_floor);
                    worst = worst.max((b.mean - a.mean) / pooled);
                }
            }
            rec.at_most("comparison-laplace-max-z", worst, g.z_cell);
        }
        Err(e) => rec.failed("comparison-laplace-max-z", g.z_cell, e),
    }
}

fn truncation_gate(sc: &Scenario, rec: &mut Recorder) {
    let g = sc.gates;
    let run = || -> Result<(f64, f64), cumulant::SolveError> {
        let mut order_violation: f64 = 0.0;
        let mut ratio: f64 = 0.0;
        for &lambda in &sc.lambda_grid {
            let v = solve_backward_on(&sc.env, 0.0, sc.t, lambda, &sc.solver)?.value();
            let mut prev: Option<Vec2> = None;
            let mut dist = Vec::new();
            for &k in &sc.truncation {
                let env_k = truncate_large_jumps(&sc.env, k);
                let vk = solve_backward_on(&env_k, 0.0, sc.t, lambda, &sc.solver)?.value();
                for i in 0..2 {
                    order_violation = order_violation.max(vk[i] - v[i]);
                    if let Some(p) = prev {
                        order_violation = order_violation.max(p[i] - vk[i]);
                    }
                }
                dist.push((vk[0] - v[0]).abs().max((vk[1] - v[1]).abs()));
                prev = Some(vk);
            }
            let (first, last) = (dist[0], dist[dist.len() - 1]);
            if first > 0.0 {
                ratio = ratio.max(last / first);
            } else if last > 0.0 {
                ratio = f64::INFINITY;
            }
        }
        Ok((order_violation, ratio))
    };
    match run() {
        Ok((order, ratio)) => {
            rec.at_most("truncation-order-violation", order, g.identity_tol);
            let any_effect = ratio > 0.0;
            let name = "truncation-distance-ratio";
            if any_effect {
                rec.push(name, ratio, 1.0, ratio < 1.0);
            } else {
                rec.at_most(name, ratio, 1.0);
            }
        }
        Err(e) => rec.failed("truncation-order-violation", g.identity_tol, e),
    }
}

fn extinction_gate(sc: &Scenario, stats: Option<&EnsembleStats>, rec: &mut Recorder) {
    let g = sc.gates;
    let diag = match v_infinity(&sc.env, sc.t, &default_ladder(), &sc.solver) {
        Ok(d) => d,
        Err(e) => {
            rec.failed("extinction-max-z", g.z_extinction, e);
            return;
        }
    };
    let mut exponent = 0.0;
    for i in 0..2 {
        if sc.x0[i] == 0.0 {
            continue;
        }
        match diag.limit[i] {
            Limit::Finite(v) => exponent += sc.x0[i] * v,
            Limit::Infinite => exponent = f64::INFINITY,
            // the ladder did not settle: no analytic target
            Limit::Ambiguous => return,
        }
    }
    let exact = (-exponent).exp();
    let Some(stats) = stats else { return };
    rec.at_most(
        "extinction-max-z",
        stats.extinction.z_score(exact, g.se_floor),
        g.z_extinction,
    );

    if let Some(refine) = &sc.refinement {
        let noise = NoiseStream::new(seed_for(sc.seed, 4));
        let bias: Result<Vec<f64>, _> = refine
            .steps
            .iter()
            .map(|&h| {
                let opts = SimOptions { step: h, ..sc.sim };
                extinction_frequency(&sc.env, sc.x0, sc.t, sc.n_paths, &opts, &noise)
                    .map(|e| (e.mean - exact).abs())
            })
            .collect();
        match bias {
            Ok(b) => {
                let ratio = if b[0] > 0.0 { b[1] / b[0] } else { f64::INFINITY };
                rec.push("extinction-refinement-bias-ratio", ratio, 1.0, ratio < 1.0);
            }
            Err(e) => rec.failed("extinction-refinement-bias-ratio", 1.0, e),
        }
    }
}

fn functional_gate(sc: &Scenario, zeta: &WeightMeasure, rec: &mut Recorder) {
    let g = sc.gates;
    let lambda = sc.lambda_grid.first().copied().unwrap_or([1.0, 1.0]);

    let reduction = || -> Result<f64, cumulant::SolveError> {
        let u = solve_functional(&sc.env, &WeightMeasure::zero(), 0.0, sc.t, lambda, &sc.solver)?;
        let v = solve_backward_on(&sc.env, 0.0, sc.t, lambda, &sc.solver)?;
        let mut worst: f64 = 0.0;
        for p in &v.grid {
            let a = u.u.value_at(p.r).unwrap_or([f64::NAN; 2]);
            worst = worst.max((a[0] - p.value[0]).abs()).max((a[1] - p.value[1]).abs());
        }
        Ok(worst)
    };
    match reduction() {
        Ok(r) => rec.at_most("functional-zero-reduction", r, g.identity_tol),
        Err(e) => rec.failed("functional-zero-reduction", g.identity_tol, e),
    }

    let terminal = || -> Result<f64, cumulant::SolveError> {
        let mut atom = WeightMeasure::zero();
        for (i, m) in atom.zeta.iter_mut().enumerate() {
            *m = SignedMeasure::zero().with_atoms(&[(sc.t, lambda[i])]);
        }
        let w = solve_w(&sc.env, &atom, 0.0, sc.t, &sc.solver)?;
        let v = solve_backward_on(&sc.env, 0.0, sc.t, lambda, &sc.solver)?.value();
        Ok((w[0] - v[0]).abs().max((w[1] - v[1]).abs()))
    };
    match terminal() {
        Ok(r) => rec.at_most("functional-terminal-atom", r, g.identity_tol),
        Err(e) => rec.failed("functional-terminal-atom", g.identity_tol, e),
    }

    let w = match solve_w(&sc.env, zeta, 0.0, sc.t, &sc.solver) {
        Ok(w) => w,
        Err(e) => {
            rec.failed("functional-mc-z", g.z_cell, e);
            return;
        }
    };
    let noise = NoiseStream::new(seed_for(sc.seed, 5));
    match mc_functional(&sc.env, sc.x0, zeta, 0.0, sc.t, sc.n_paths, &sc.sim, &noise) {
        Ok(est) => rec.at_most(
            "functional-mc-z",
            est.z_score((-dot(sc.x0, w)).exp(), g.se_floor),
            g.z_cell,
        ),
        Err(e) => rec.failed("functional-mc-z", g.z_cell, e),
    }
}

/// Run scenarios in parallel; reports come back sorted by scenario name.
pub fn run_suite(scenarios: &[Scenario]) -> Vec<VerdictReport> {
    let mut reports: Vec<VerdictReport> = scenarios.par_iter().map(run_scenario).collect();
    reports.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    reports
}

/// Constant densities, as a measure.
fn rate(v: f64) -> SignedMeasure {
    SignedMeasure::constant(v)
}

fn feller_env() -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0] = rate(1.0);
    env.c[0] = rate(0.5);
    env
}

fn jump_env() -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0] = rate(0.5);
    env.b[1][1] = rate(0.8);
    env.b[0][1] = rate(0.2);
    env.m[0].density_components.push(DensityJump {
        rate: Density::Constant(1.0),
        measure: SpatialMeasure::single(Component::dirac(0.8, [0.6, 0.4])),
    });
    env.m[1].density_components.push(DensityJump {
        rate: Density::PiecewiseLinear(vec![[0.0, 0.5], [1.0, 1.5]]),
        measure: SpatialMeasure::single(Component::exp_product(1.0, [2.0, 3.0])),
    });
    env
}

fn atom_rich_env() -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0] = rate(0.3).with_atoms(&[(0.3, 1.0)]);
    env.b[1][1] = rate(0.2).with_atoms(&[(0.6, 0.5)]);
    env.b[0][1] = rate(0.4).with_atoms(&[(0.6, 0.3)]);
    env.b[1][0] = rate(0.3);
    env.c[0] = rate(0.3);
    env.c[1] = rate(0.4);
    env.m[0].atoms.push(AtomJump {
        time: 0.8,
        measure: SpatialMeasure::single(Component::dirac(0.5, [0.8, 0.3])),
    });
    env.m[1].atoms.push(AtomJump {
        time: 0.45,
        measure: SpatialMeasure::single(Component::exp_product(0.6, [2.0, 4.0])),
    });
    env
}

/// The built-in scenario set.
pub fn suite() -> Vec<Scenario> {
    let mut out = Vec::new();

    out.push(Scenario::new("zero-env", EnvSpec::zero(1.0), [1.0, 2.0]));

    let mut linear = EnvSpec::zero(1.0);
    linear.b[0][0] = SignedMeasure {
        density: Density::PiecewiseLinear(vec![[0.0, 1.0], [0.5, -0.5], [1.0, 0.5]]),
        atoms: Vec::new(),
    };
    linear.b[1][1] = rate(0.7);
    linear.b[0][1] = rate(0.4);
    linear.b[1][0] = SignedMeasure {
        density: Density::Table {
            mesh: vec![0.0, 0.4],
            values: vec![0.2, 0.6],
        },
        atoms: Vec::new(),
    };
    let mut sc = Scenario::new("deterministic-linear", linear, [1.0, 2.0]);
    sc.comparison = Some(Comparison {
        x0_high: [1.5, 2.5],
        pairs: 1000,
    });
    out.push(sc);

    let mut sc = Scenario::new("feller", feller_env(), [1.0, 0.0]);
    sc.lambda_grid = vec![[0.5, 0.0], [1.0, 1.0], [2.0, 0.0], [4.0, 0.0]];
    sc.seed = 3;
    sc.comparison = Some(Comparison {
        x0_high: [1.5, 0.0],
        pairs: 0,
    });
    sc.refinement = Some(Refinement { steps: [0.05, 0.01] });
    out.push(sc);

    let mut decoupled = EnvSpec::zero(1.0);
    decoupled.b[0][0] = rate(1.0);
    decoupled.c[0] = rate(0.5);
    decoupled.b[1][1] = rate(-0.3);
    decoupled.c[1] = rate(0.8);
    let mut sc = Scenario::new("decoupled", decoupled, [1.0, 1.5]);
    sc.seed = 4;
    sc.comparison = Some(Comparison {
        x0_high: [1.5, 2.0],
        pairs: 0,
    });
    out.push(sc);

    let mut sc = Scenario::new("dirac-cross-jumps", jump_env(), [1.0, 1.0]);
    sc.seed = 5;
    sc.sim.step = 1e-3;
    sc.comparison = Some(Comparison {
        x0_high: [2.0, 1.0],
        pairs: 1000,
    });
    sc.truncation = vec![0.25, 0.5, 1.0, 2.0];
    out.push(sc);

    let mut stable = EnvSpec::zero(1.0);
    stable.b[0][0] = rate(0.5);
    stable.m[0].density_components.push(DensityJump {
        rate: Density::Constant(1.0),
        measure: SpatialMeasure::single(Component::stable_axis(0.5, 0, 1.5)),
    });
    let mut sc = Scenario::new("stable-axis", stable, [1.0, 0.0]);
    sc.seed = 6;
    sc.sim.step = 1e-3;
    sc.sim.small_jumps = SmallJumpMode::GaussianApprox;
    sc.lambda_grid = vec![[0.5, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0]];
    sc.comparison = Some(Comparison {
        x0_high: [2.0, 0.0],
        pairs: 1000,
    });
    sc.truncation = vec![1.0, 2.0, 4.0, 8.0];
    out.push(sc);

    let mut sc = Scenario::new("atom-rich", atom_rich_env(), [1.0, 1.0]);
    sc.seed = 7;
    sc.comparison = Some(Comparison {
        x0_high: [1.5, 1.5],
        pairs: 0,
    });
    out.push(sc);

    let mut bottleneck = feller_env();
    bottleneck.b[0][0] = rate(1.0).with_atoms(&[(0.5, 1.0)]);
    let mut sc = Scenario::new("bottleneck", bottleneck, [1.0, 0.0]);
    sc.seed = 8;
    out.push(sc);

    let mut trunc = EnvSpec::zero(1.0);
    trunc.b[0][0] = rate(0.5);
    trunc.b[1][1] = rate(0.5);
    trunc.b[1][0] = rate(0.2);
    trunc.m[0].density_components.push(DensityJump {
        rate: Density::Constant(0.5),
        measure: SpatialMeasure::new(vec![
            Component::dirac(0.4, [3.0, 0.5]),
            Component::exp_product(0.6, [0.5, 1.0]),
        ]),
    });
    trunc.m[1].density_components.push(DensityJump {
        rate: Density::Constant(0.5),
        measure: SpatialMeasure::single(Component::dirac(0.5, [1.5, 6.0])),
    });
    let mut sc = Scenario::new("truncation-family", trunc, [1.0, 1.0]);
    sc.seed = 9;
    sc.sim.step = 1e-3;
    sc.truncation = vec![1.0, 2.0, 4.0, 8.0];
    out.push(sc);

    let mut zeta = WeightMeasure::zero();
    zeta.zeta[0] = rate(1.0);
    let mut sc = Scenario::new("functional-density", feller_env(), [1.0, 0.0]);
    sc.seed = 10;
    sc.lambda_grid = vec![[0.5, 0.0], [1.0, 1.0], [2.0, 0.0], [4.0, 0.0]];
    sc.zeta = Some(zeta);
    out.push(sc);

    let mut zeta = WeightMeasure::zero();
    zeta.zeta[0] = SignedMeasure::zero().with_atoms(&[(0.3, 0.5), (0.6, 1.0)]);
    zeta.zeta[1] = rate(0.5).with_atoms(&[(0.45, 0.7)]);
    let mut sc = Scenario::new("functional-atoms", atom_rich_env(), [1.0, 1.0]);
    sc.seed = 11;
    sc.zeta = Some(zeta);
    out.push(sc);

    let mut zeta = WeightMeasure::zero();
    zeta.zeta[0] = SignedMeasure::zero().with_atoms(&[(1.0, 1.5)]);
    zeta.zeta[1] = SignedMeasure::zero().with_atoms(&[(1.0, 0.5)]);
    let mut sc = Scenario::new("functional-terminal-atom", jump_env(), [1.0, 1.0]);
    sc.seed = 12;
    sc.sim.step = 1e-3;
    sc.zeta = Some(zeta);
    out.push(sc);

    out
}

/// A random environment on `[0, 1]` that passes validation: signed
/// piecewise-linear diagonal drifts, nonnegative cross drifts and
/// diffusions, and jump kernels mixing all component kinds, with atoms.
pub fn random_env(seed: u64) -> EnvSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let env = draw_env(&mut rng);
        if env.validate().pass() {
            return env;
        }
    }
}

fn draw_env(rng: &mut ChaCha8Rng) -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    for i in 0..2 {
        let j = 1 - i;
        let knots: Vec<[f64; 2]> = [0.0, rng.random_range(0.2..0.8), 1.0]
            .iter()
            .map(|&s| [s, rng.random_range(-0.5..1.5)])
            .collect();
        env.b[i][i].density = Density::PiecewiseLinear(knots);
        if rng.random_bool(0.5) {
            env.b[i][j] = rate(rng.random_range(0.0..0.8));
        }
        if rng.random_bool(0.6) {
            env.c[i] = rate(rng.random_range(0.0..0.6));
        }
        if rng.random_bool(0.6) {
            let component = match rng.random_range(0..3) {
                0 => Component::dirac(
                    rng.random_range(0.1..1.0),
                    [rng.random_range(0.05..1.5), rng.random_range(0.0..1.0)],
                ),
                1 => Component::exp_product(
                    rng.random_range(0.1..1.0),
                    [rng.random_range(1.0..4.0), rng.random_range(1.0..4.0)],
                ),
                _ => Component::stable_axis(rng.random_range(0.1..0.5), i, rng.random_range(1.2..1.8)),
            };
            env.m[i].density_components.push(DensityJump {
                rate: Density::Constant(rng.random_range(0.2..1.5)),
                measure: SpatialMeasure::single(component),
            });
        }
        if rng.random_bool(0.5) {
            let s = rng.random_range(0.1..0.9);
            let db = rng.random_range(-0.3..0.6);
            env.b[i][i] = SignedMeasure {
                density: env.b[i][i].density.clone(),
                atoms: Vec::new(),
            }
            .with_atoms(&[(s, db)]);
            if rng.random_bool(0.5) {
                let size = rng.random_range(0.1..1.0);
                let mut z = [0.0; 2];
                z[i] = size;
                z[j] = rng.random_range(0.0..0.5);
                let w = rng.random_range(0.0..(1.0 - db).min(1.0)) / size * 0.9;
                env.m[i].atoms.push(AtomJump {
                    time: s,
                    measure: SpatialMeasure::single(Component::dirac(w.max(1e-3), z)),
                });
            }
            if rng.random_bool(0.5) {
                env.b[i][j] = SignedMeasure {
                    density: env.b[i][j].density.clone(),
                    atoms: Vec::new(),
                }
                .with_atoms(&[(rng.random_range(0.1..0.9), rng.random_range(0.0..0.4))]);
            }
        }
    }
    env
}
