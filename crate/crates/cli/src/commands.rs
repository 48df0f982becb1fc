use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use tcbve::config::{self, ConfigFile, LoadedConfig, RunSection};
use tcbve::cumulant::{self, default_ladder, v_infinity, Limit};
use tcbve::environment::Atom;
use tcbve::functionals::{mc_functional, solve_functional};
use tcbve::moments::{first_moment, moment_bound};
use tcbve::simulate::{extinction_frequency, simulate_ensemble, simulate_path};
use tcbve::verify::{reports_to_json, run_suite, suite, Scenario};
use tcbve::{EnvSpec, NoiseStream, SimOptions, SolverOptions, Vec2, WeightMeasure};

use crate::output::{write_csv, write_json, write_text};
use crate::{
    CliError, CliResult, ConfigArgs, CumulantArgs, ExtinctionArgs, Format, FunctionalArgs,
    MomentsArgs, SimArgs, SimulateArgs, VerifyArgs,
};

const DEFAULT_PATHS: usize = 10_000;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load(args: &ConfigArgs) -> Result<LoadedConfig, CliError> {
    config::load(&args.config).map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))
}

/// Fail with exit code 2 on any violated model constraint.
fn require_valid(cfg: &LoadedConfig) -> CliResult {
    let report = cfg.env.validate();
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    let zeta = cfg.zeta.as_ref().map(|z| z.check(cfg.env.horizon));
    if let Some(Err(e)) = &zeta {
        eprintln!("violation: {e}");
    }
    if report.pass() && !matches!(zeta, Some(Err(_))) {
        Ok(())
    } else {
        Err(CliError::Invalid("configuration violates the model constraints".into()))
    }
}

/// Write the config with `run` merged in, if requested.
fn dump(args: &ConfigArgs, cfg: &LoadedConfig, run: &RunSection) -> CliResult {
    let Some(path) = &args.dump_config else {
        return Ok(());
    };
    let mut file = ConfigFile::from_parts(&cfg.env, cfg.zeta.as_ref(), Some(run.clone()));
    file.verify = cfg.verify.clone();
    let text = config::render_for(path, &file).map_err(runtime)?;
    write_text(Some(path), &text)
}

fn horizon_time(env: &EnvSpec, t: Option<f64>) -> Result<f64, CliError> {
    let t = t.unwrap_or(env.horizon);
    if t > 0.0 && t <= env.horizon {
        Ok(t)
    } else {
        Err(CliError::Usage(format!("t = {t} must lie in (0, {}]", env.horizon)))
    }
}

fn state(x0: Option<Vec2>, what: &str) -> Result<Vec2, CliError> {
    let x = x0.ok_or_else(|| CliError::Usage(format!("{what} is required (flag or run section)")))?;
    if x.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("{what} must be finite and nonnegative, got {x:?}")))
    }
}

fn merge_sim(run: &mut RunSection, sim: &SimArgs) {
    run.paths = sim.paths.or(run.paths);
    run.step = sim.step.or(run.step);
    run.seed = sim.seed.or(run.seed);
    run.epsilon = sim.epsilon.or(run.epsilon);
    run.small_jumps = sim.small_jumps.map(Into::into).or(run.small_jumps);
}

fn sim_options(run: &RunSection) -> SimOptions {
    let d = SimOptions::default();
    SimOptions {
        step: run.step.unwrap_or(d.step),
        epsilon: run.epsilon.unwrap_or(d.epsilon),
        small_jumps: run.small_jumps.unwrap_or(d.small_jumps),
        ..d
    }
}

fn bit(b: bool) -> u8 {
    u8::from(b)
}

pub fn validate(args: &ConfigArgs) -> CliResult {
    let cfg = load(args)?;
    dump(args, &cfg, &cfg.run)?;
    require_valid(&cfg)?;
    write_text(None, "valid")
}

#[derive(Serialize)]
struct CumulantRow {
    r: f64,
    v1: f64,
    v2: f64,
    is_atom: u8,
    v1_left: f64,
    v2_left: f64,
}

pub fn cumulant(args: &CumulantArgs) -> CliResult {
    let cfg = load(&args.cfg)?;
    let mut run = cfg.run.clone();
    run.t = args.t.or(run.t);
    run.lambda = args.lambda.or(run.lambda);
    dump(&args.cfg, &cfg, &run)?;
    require_valid(&cfg)?;
    let t = horizon_time(&cfg.env, run.t)?;
    let lambda = state(run.lambda, "--lambda")?;
    if !(args.from >= 0.0 && args.from <= t) {
        return Err(CliError::Usage(format!("--from must lie in [0, {t}]")));
    }
    let sol = cumulant::solve_backward_on(&cfg.env, args.from, t, lambda, &SolverOptions::default())
        .map_err(runtime)?;
    let rows: Vec<CumulantRow> = sol
        .grid
        .iter()
        .map(|p| CumulantRow {
            r: p.r,
            v1: p.value[0],
            v2: p.value[1],
            is_atom: bit(p.is_atom),
            v1_left: p.left[0],
            v2_left: p.left[1],
        })
        .collect();
    write_csv(args.out.as_deref(), &rows)
}

#[derive(Serialize)]
struct MomentRow {
    t: f64,
    m1: f64,
    m2: f64,
    bound1: f64,
    bound2: f64,
}

pub fn moments(args: &MomentsArgs) -> CliResult {
    let cfg = load(&args.cfg)?;
    let mut run = cfg.run.clone();
    run.t = args.t.or(run.t);
    run.x0 = args.x0.or(run.x0);
    dump(&args.cfg, &cfg, &run)?;
    require_valid(&cfg)?;
    let t = horizon_time(&cfg.env, run.t)?;
    let x0 = state(run.x0, "--x0")?;
    let curve = first_moment(&cfg.env, x0, t).map_err(runtime)?;
    let rows: Vec<MomentRow> = curve
        .times
        .iter()
        .zip(&curve.values)
        .map(|(&s, m)| {
            let b = moment_bound(&cfg.env, x0, s);
            MomentRow {
                t: s,
                m1: m[0],
                m2: m[1],
                bound1: b[0],
                bound2: b[1],
            }
        })
        .collect();
    write_csv(args.out.as_deref(), &rows)
}

fn read_lambda_grid(path: &Path) -> Result<Vec<Vec2>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, l)| {
            crate::parse_pair(l)
                .map_err(|e| CliError::Usage(format!("{} entry {}: {e}", path.display(), k + 1)))
        })
        .collect()
}

#[derive(Serialize)]
struct StatRow {
    t: f64,
    quantity: &'static str,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    estimate: f64,
    se: Option<f64>,
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    x1: f64,
    x2: f64,
    is_atom: u8,
    absorbed: u8,
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let cfg = load(&args.cfg)?;
    let mut run = cfg.run.clone();
    run.t = args.t.or(run.t);
    run.x0 = args.x0.or(run.x0);
    run.checkpoints = args.checkpoints.clone().or(run.checkpoints);
    if let Some(p) = &args.lambda_grid {
        run.lambda_grid = Some(read_lambda_grid(p)?);
    }
    merge_sim(&mut run, &args.sim);
    dump(&args.cfg, &cfg, &run)?;
    require_valid(&cfg)?;
    let t = horizon_time(&cfg.env, run.t)?;
    let x0 = state(run.x0, "--x0")?;
    let checkpoints = run.checkpoints.clone().unwrap_or_else(|| vec![t]);
    if checkpoints.iter().any(|&s| !(s > 0.0 && s <= t)) {
        return Err(CliError::Usage(format!("checkpoints must lie in (0, {t}]")));
    }
    let grid = run.lambda_grid.clone().unwrap_or_default();
    let paths = run.paths.unwrap_or(DEFAULT_PATHS);
    let seed = run.seed.unwrap_or(1);
    let opts = sim_options(&run);
    let noise = NoiseStream::new(seed);

    if let Some(p) = &args.trajectory {
        let traj = simulate_path(&cfg.env, x0, t, &opts, &noise, args.path_id).map_err(runtime)?;
        let absorbed_at = traj.absorbed_at.unwrap_or(f64::INFINITY);
        let rows: Vec<TrajectoryRow> = traj
            .points
            .iter()
            .map(|q| TrajectoryRow {
                t: q.t,
                x1: q.x[0],
                x2: q.x[1],
                is_atom: bit(q.is_atom),
                absorbed: bit(q.t >= absorbed_at),
            })
            .collect();
        write_csv(Some(p), &rows)?;
    }

    let started = Instant::now();
    let stats = simulate_ensemble(&cfg.env, x0, t, &checkpoints, &grid, paths, &opts, &noise)
        .map_err(runtime)?;
    eprintln!("simulated {paths} paths in {:.2?}", started.elapsed());
    match args.out {
        Format::Json => write_json(
            args.output.as_deref(),
            &json!({
                "x0": x0,
                "t": t,
                "seed": seed,
                "step": opts.step,
                "stats": stats,
            }),
        ),
        Format::Csv => {
            let mut rows = Vec::new();
            let row = |t, quantity, lambda: Option<Vec2>, estimate, se| StatRow {
                t,
                quantity,
                lambda1: lambda.map(|l| l[0]),
                lambda2: lambda.map(|l| l[1]),
                estimate,
                se,
            };
            for cp in &stats.checkpoints {
                for (i, name) in ["mean1", "mean2"].into_iter().enumerate() {
                    rows.push(row(cp.t, name, None, cp.mean[i].mean, Some(cp.mean[i].se)));
                }
                rows.push(row(cp.t, "var1", None, cp.variance[0], None));
                rows.push(row(cp.t, "var2", None, cp.variance[1], None));
                for l in &cp.laplace {
                    rows.push(row(cp.t, "laplace", Some(l.lambda), l.estimate.mean, Some(l.estimate.se)));
                }
                rows.push(row(cp.t, "extinct", None, cp.extinct.mean, Some(cp.extinct.se)));
            }
            write_csv(args.output.as_deref(), &rows)
        }
    }
}

/// `ζ + λ δ_t`, so that a terminal value becomes part of the weight.
fn with_terminal(zeta: &WeightMeasure, t: f64, lambda: Vec2) -> WeightMeasure {
    let mut out = zeta.clone();
    for (m, l) in out.zeta.iter_mut().zip(lambda) {
        if l == 0.0 {
            continue;
        }
        match m.atoms.iter_mut().find(|a| a.time == t) {
            Some(a) => a.mass += l,
            None => {
                m.atoms.push(Atom { time: t, mass: l });
                m.atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
            }
        }
    }
    out
}

pub fn functional(args: &FunctionalArgs) -> CliResult {
    let cfg = load(&args.cfg)?;
    let mut run = cfg.run.clone();
    run.t = args.t.or(run.t);
    run.x0 = args.x0.or(run.x0);
    run.lambda = args.lambda.or(run.lambda);
    merge_sim(&mut run, &args.sim);
    dump(&args.cfg, &cfg, &run)?;
    require_valid(&cfg)?;
    let t = horizon_time(&cfg.env, run.t)?;
    let x0 = state(run.x0, "--x0")?;
    let lambda = state(Some(run.lambda.unwrap_or([0.0, 0.0])), "--lambda")?;
    if !(args.from >= 0.0 && args.from <= t) {
        return Err(CliError::Usage(format!("--from must lie in [0, {t}]")));
    }
    let zeta = match &cfg.zeta {
        Some(z) => z.clone(),
        None => {
            eprintln!("note: no `zeta` block; using the zero weight measure");
            WeightMeasure::zero()
        }
    };
    let sol = solve_functional(&cfg.env, &zeta, args.from, t, lambda, &SolverOptions::default())
        .map_err(runtime)?;
    let w = sol.w();
    let analytic = (-(x0[0] * w[0] + x0[1] * w[1])).exp();
    let mut report = json!({
        "r": args.from,
        "t": t,
        "x0": x0,
        "lambda": lambda,
        "u": sol.u(),
        "w": w,
        "laplace": analytic,
    });
    if args.mc {
        let paths = run.paths.unwrap_or(DEFAULT_PATHS);
        let seed = run.seed.unwrap_or(1);
        let weight = with_terminal(&zeta, t, lambda);
        let est = mc_functional(
            &cfg.env,
            x0,
            &weight,
            args.from,
            t,
            paths,
            &sim_options(&run),
            &NoiseStream::new(seed),
        )
        .map_err(runtime)?;
        report["mc"] = json!({
            "paths": paths,
            "seed": seed,
            "estimate": est.mean,
            "se": est.se,
            "z": est.z_score(analytic, 1e-12),
        });
    }
    write_json(args.out.as_deref(), &report)
}

fn limit_json(l: Limit) -> serde_json::Value {
    match l {
        Limit::Finite(v) => json!(v),
        Limit::Infinite => json!("inf"),
        Limit::Ambiguous => serde_json::Value::Null,
    }
}

pub fn extinction(args: &ExtinctionArgs) -> CliResult {
    let cfg = load(&args.cfg)?;
    let mut run = cfg.run.clone();
    run.t = args.t.or(run.t);
    run.x0 = args.x0.or(run.x0);
    merge_sim(&mut run, &args.sim);
    dump(&args.cfg, &cfg, &run)?;
    require_valid(&cfg)?;
    let t = horizon_time(&cfg.env, run.t)?;
    let x0 = state(run.x0, "--x0")?;
    let opts = SolverOptions::default();
    let ladder = v_infinity(&cfg.env, t, &default_ladder(), &opts).map_err(runtime)?;
    let p = cumulant::extinction_prob(&cfg.env, x0, t, &opts).map_err(runtime)?;
    let mut report = json!({
        "t": t,
        "x0": x0,
        "v_infinity": ladder.limit.map(limit_json),
        "monotone": ladder.monotone,
        "rungs": ladder.rungs.len(),
        "probability": p,
    });
    if args.mc {
        let paths = run.paths.unwrap_or(DEFAULT_PATHS);
        let seed = run.seed.unwrap_or(1);
        let est = extinction_frequency(&cfg.env, x0, t, paths, &sim_options(&run), &NoiseStream::new(seed))
            .map_err(runtime)?;
        report["mc"] = json!({
            "paths": paths,
            "seed": seed,
            "frequency": est.mean,
            "se": est.se,
            "z": est.z_score(p, 1e-12),
        });
    }
    write_json(args.out.as_deref(), &report)
}

/// Seed of the `k`-th scenario under a global override.
fn derived_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1)
}

pub fn verify(args: &VerifyArgs) -> CliResult {
    let mut scenarios: Vec<Scenario> = if args.suite {
        suite()
    } else {
        args.scenario
            .iter()
            .map(|p| {
                let cfg = config::load(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned());
                Ok(Scenario::from_config(&cfg, stem.as_deref().unwrap_or("scenario")))
            })
            .collect::<Result<_, CliError>>()?
    };
    if let Some(pattern) = &args.only {
        scenarios.retain(|s| s.name.contains(pattern.as_str()));
        if scenarios.is_empty() {
            return Err(CliError::Usage(format!("no scenario matches `{pattern}`")));
        }
    }
    if let Some(seed) = args.seed {
        for (k, sc) in scenarios.iter_mut().enumerate() {
            sc.seed = derived_seed(seed, k);
        }
    }
    let started = Instant::now();
    let reports = run_suite(&scenarios);
    for r in &reports {
        let total: std::time::Duration = r.checks.iter().map(|c| c.runtime).sum();
        eprintln!(
            "{} {} ({} checks, {:.1?})",
            if r.pass { "PASS" } else { "FAIL" },
            r.scenario,
            r.checks.len(),
            total
        );
        for c in r.checks.iter().filter(|c| !c.pass) {
            match &c.error {
                Some(e) => eprintln!("  {}: {e}", c.name),
                None => eprintln!("  {}: {} vs threshold {}", c.name, c.statistic, c.threshold),
            }
        }
    }
    eprintln!("{} scenario(s) in {:.1?}", reports.len(), started.elapsed());
    write_text(args.out.as_deref(), &reports_to_json(&reports))?;
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CliError::GatesFailed)
    }
}
