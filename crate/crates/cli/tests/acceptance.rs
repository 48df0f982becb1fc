//! Acceptance run: one `PASS`/`FAIL` line per criterion.
//!
//! The built-in suite is executed twice through the binary, with different
//! thread counts; most criteria read the resulting verdict report, the rest
//! call the library directly.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use tcbve::cumulant::{semigroup_check, solve_backward};
use tcbve::moments::{first_moment, moment_bound};
use tcbve::simulate::extinction_frequency;
use tcbve::verify::{random_env, suite, Scenario};
use tcbve::{Check, EnvSpec, Gates, NoiseStream, SignedMeasure, SolverOptions, VerdictReport};

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct SuiteRun {
    bytes: Vec<u8>,
    reports: Vec<VerdictReport>,
    exit: Option<i32>,
    seconds: f64,
}

fn run_suite(dir: &Path, threads: &str) -> SuiteRun {
    let out = dir.join(format!("report-{threads}.json"));
    let started = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_tcbve"))
        .args(["--threads", threads, "verify", "--suite", "--out"])
        .arg(&out)
        .status()
        .expect("tcbve runs");
    let seconds = started.elapsed().as_secs_f64();
    let bytes = std::fs::read(&out).unwrap_or_default();
    let reports = serde_json::from_slice(&bytes).unwrap_or_default();
    SuiteRun {
        bytes,
        reports,
        exit: status.code(),
        seconds,
    }
}

fn find<'a>(reports: &'a [VerdictReport], scenario: &str, check: &str) -> Option<&'a Check> {
    reports
        .iter()
        .find(|r| r.scenario == scenario)
        .and_then(|r| r.check(check))
}

/// Every listed check of every listed scenario is present and green;
/// returns the failures.
fn require(reports: &[VerdictReport], scenarios: &[&Scenario], checks: &[&str]) -> Vec<String> {
    let mut bad = Vec::new();
    for sc in scenarios {
        for name in checks {
            match find(reports, &sc.name, name) {
                Some(c) if c.pass => {}
                Some(c) => bad.push(format!("{}/{} = {} (threshold {})", sc.name, name, c.statistic, c.threshold)),
                None => bad.push(format!("{}/{} missing", sc.name, name)),
            }
        }
    }
    bad
}

/// Scenarios whose thresholds differ from the defaults.
fn loosened(scenarios: &[Scenario]) -> Vec<String> {
    scenarios
        .iter()
        .filter(|s| s.gates != Gates::default())
        .map(|s| format!("{}: non-default gates", s.name))
        .collect()
}

fn worst(reports: &[VerdictReport], scenarios: &[&Scenario], check: &str) -> f64 {
    scenarios
        .iter()
        .filter_map(|sc| find(reports, &sc.name, check))
        .map(|c| c.statistic)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn verdict(id: u8, title: &'static str, failures: Vec<String>, summary: String) -> Verdict {
    let pass = failures.is_empty();
    let detail = if pass { summary } else { failures.join("; ") };
    Verdict {
        id,
        title,
        pass,
        detail,
    }
}

fn criterion_1() -> Verdict {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0] = SignedMeasure::constant(1.0);
    env.c[0] = SignedMeasure::constant(0.5);
    let started = Instant::now();
    let v = solve_backward(&env, 1.0, [2.0, 0.0], &SolverOptions::default()).map(|s| s.value());
    let secs = started.elapsed().as_secs_f64();
    let e = (-1f64).exp();
    let closed = 2.0 * e / (1.0 + 0.5 * 2.0 * (1.0 - e));
    let mut fail = Vec::new();
    let rel = match v {
        Ok(v) => (v[0] - closed).abs() / closed,
        Err(e) => {
            fail.push(e.to_string());
            f64::NAN
        }
    };
    if !(rel < 1e-6) {
        fail.push(format!("relative error {rel:e}"));
    }
    if secs >= 1.0 {
        fail.push(format!("took {secs:.2}s"));
    }
    verdict(1, "closed-form Feller cumulant", fail, format!("relative error {rel:.1e} in {:.3} ms", secs * 1e3))
}

fn criterion_2(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let opts = SolverOptions::default();
    let started = Instant::now();
    let mut fail = Vec::new();
    let mut max: f64 = 0.0;
    for sc in scenarios {
        let t = sc.t;
        for a in 0..5 {
            let r = t * a as f64 / 5.0;
            for b in 0..5 {
                let s = r + (t - r) * b as f64 / 4.0;
                for &lambda in &sc.lambda_grid {
                    match semigroup_check(&sc.env, r, s, t, lambda, &opts) {
                        Ok(res) => max = max.max(res[0]).max(res[1]),
                        Err(e) => fail.push(format!("{}: {e}", sc.name)),
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if !(max < 1e-6) {
        fail.push(format!("residual {max:e}"));
    }
    if secs >= 10.0 {
        fail.push(format!("took {secs:.1}s"));
    }
    let all: Vec<&Scenario> = scenarios.iter().collect();
    fail.extend(require(reports, &all, &["semigroup-residual"]));
    verdict(
        2,
        "flow property on every suite environment",
        fail,
        format!("max residual {max:.1e} over {} environments in {:.0} ms", scenarios.len(), secs * 1e3),
    )
}

fn criterion_3(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let mut fail = Vec::new();
    for sc in scenarios {
        let h_max = if sc.env.has_diffusion() { 1e-4 } else { 1e-3 };
        if sc.lambda_grid.len() < 4 || sc.checkpoints.len() < 3 || sc.n_paths < 100_000 || sc.sim.step > h_max {
            fail.push(format!("{}: grid or sample size below the required scale", sc.name));
        }
    }
    let all: Vec<&Scenario> = scenarios.iter().collect();
    fail.extend(require(reports, &all, &["laplace-cell-fraction", "laplace-max-z"]));
    let min_frac = scenarios
        .iter()
        .filter_map(|sc| find(reports, &sc.name, "laplace-cell-fraction"))
        .map(|c| c.statistic)
        .fold(f64::INFINITY, f64::min);
    fail.extend(loosened(scenarios));
    verdict(
        3,
        "Monte Carlo Laplace transform vs cumulant",
        fail,
        format!(
            "min cell fraction {min_frac:.2}, max z {:.2} over {} environments",
            worst(reports, &all, "laplace-max-z"),
            scenarios.len()
        ),
    )
}

fn criterion_4(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let all: Vec<&Scenario> = scenarios.iter().collect();
    let mut fail = require(reports, &all, &["moment-max-z", "moment-bound-gap"]);
    let mut checked = 0;
    for seed in 0..100 {
        let env = random_env(10_000 + seed);
        let x0 = [1.0 + (seed % 5) as f64 * 0.5, (seed % 3) as f64];
        match first_moment(&env, x0, 1.0) {
            Ok(curve) => {
                for (&t, m) in curve.times.iter().zip(&curve.values) {
                    let b = moment_bound(&env, x0, t);
                    let tol = |v: f64| 1e-9 * (1.0 + v.abs());
                    if m[0] > b[0] + tol(b[0]) || m[1] > b[1] + tol(b[1]) {
                        fail.push(format!("random env {seed}: bound {b:?} below mean {m:?} at t={t}"));
                    }
                }
                checked += 1;
            }
            Err(e) => fail.push(format!("random env {seed}: {e}")),
        }
    }
    fail.extend(loosened(scenarios));
    verdict(
        4,
        "first moments and moment bound",
        fail,
        format!(
            "max z {:.2}; bound dominates on {checked} random environments",
            worst(reports, &all, "moment-max-z")
        ),
    )
}

fn criterion_5(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let with_cmp: Vec<&Scenario> = scenarios.iter().filter(|s| s.comparison.is_some()).collect();
    let (pathwise, diffusive): (Vec<&Scenario>, Vec<&Scenario>) =
        with_cmp.iter().partition(|s| !s.env.has_diffusion());
    let mut fail = Vec::new();
    if pathwise.is_empty() || diffusive.is_empty() {
        fail.push("suite lacks a diffusion-free or a diffusive comparison".into());
    }
    for sc in &pathwise {
        let pairs = sc.comparison.as_ref().map_or(0, |c| c.pairs);
        if pairs < 1000 {
            fail.push(format!("{}: only {pairs} coupled pairs", sc.name));
        }
    }
    fail.extend(require(reports, &pathwise, &["comparison-order-violations"]));
    fail.extend(require(reports, &diffusive, &["comparison-laplace-max-z"]));
    fail.extend(loosened(scenarios));
    verdict(
        5,
        "comparison",
        fail,
        format!(
            "{} pathwise-ordered scenarios, {} diffusive with max ordering-violation z {:.2}",
            pathwise.len(),
            diffusive.len(),
            worst(reports, &diffusive, "comparison-laplace-max-z")
        ),
    )
}

fn criterion_6(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let mut fail = Vec::new();
    let stable: Vec<&Scenario> = scenarios.iter().filter(|s| s.name == "stable-axis").collect();
    match stable.first() {
        Some(sc) if sc.truncation == [1.0, 2.0, 4.0, 8.0] => {}
        _ => fail.push("stable-axis scenario with k in {1,2,4,8} missing".into()),
    }
    let trunc: Vec<&Scenario> = scenarios.iter().filter(|s| !s.truncation.is_empty()).collect();
    fail.extend(require(reports, &trunc, &["truncation-order-violation", "truncation-distance-ratio"]));
    verdict(
        6,
        "truncation monotonicity",
        fail,
        format!(
            "distance ratio on stable-axis {:.3}",
            worst(reports, &stable, "truncation-distance-ratio")
        ),
    )
}

fn criterion_7(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let mut fail = Vec::new();
    let mut freq = f64::NAN;
    match scenarios.iter().find(|s| s.name == "bottleneck") {
        Some(sc) => {
            match extinction_frequency(&sc.env, sc.x0, sc.t, sc.n_paths, &sc.sim, &NoiseStream::new(sc.seed)) {
                Ok(p) => freq = p.mean,
                Err(e) => fail.push(format!("bottleneck: {e}")),
            }
            if freq != 1.0 {
                fail.push(format!("bottleneck extinction frequency {freq}"));
            }
            fail.extend(require(reports, &[sc], &["extinction-max-z"]));
        }
        None => fail.push("bottleneck scenario missing".into()),
    }
    let feller: Vec<&Scenario> = scenarios.iter().filter(|s| s.name == "feller").collect();
    if feller.is_empty() {
        fail.push("feller scenario missing".into());
    }
    fail.extend(require(reports, &feller, &["extinction-max-z", "extinction-refinement-bias-ratio"]));
    fail.extend(loosened(scenarios));
    verdict(
        7,
        "extinction",
        fail,
        format!(
            "bottleneck frequency {freq}; Feller z {:.2}, refinement bias ratio {:.2}",
            worst(reports, &feller, "extinction-max-z"),
            worst(reports, &feller, "extinction-refinement-bias-ratio")
        ),
    )
}

fn criterion_8(scenarios: &[Scenario], reports: &[VerdictReport]) -> Verdict {
    let functional: Vec<&Scenario> = scenarios.iter().filter(|s| s.zeta.is_some()).collect();
    let mut fail = Vec::new();
    if functional.len() < 3 {
        fail.push(format!("only {} functional scenarios", functional.len()));
    }
    fail.extend(require(
        reports,
        &functional,
        &["functional-zero-reduction", "functional-terminal-atom", "functional-mc-z"],
    ));
    let identity = worst(reports, &functional, "functional-terminal-atom");
    if !(identity <= 1e-8) {
        fail.push(format!("terminal-atom identity error {identity:e}"));
    }
    fail.extend(loosened(scenarios));
    verdict(
        8,
        "functionals",
        fail,
        format!(
            "reduction error {:.1e}, terminal-atom error {identity:.1e}, max MC z {:.2}",
            worst(reports, &functional, "functional-zero-reduction"),
            worst(reports, &functional, "functional-mc-z")
        ),
    )
}

fn criterion_9(a: &SuiteRun, b: &SuiteRun) -> Verdict {
    let mut fail = Vec::new();
    if a.bytes.is_empty() || b.bytes.is_empty() {
        fail.push("a report is missing".into());
    } else if a.bytes != b.bytes {
        fail.push("reports differ between thread counts".into());
    }
    verdict(
        9,
        "reproducible reports",
        fail,
        format!("{} identical bytes at 1 and 4 threads", a.bytes.len()),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::TempDir::new().expect("temporary directory");
    let scenarios = suite();
    let first = run_suite(dir.path(), "1");
    let second = run_suite(dir.path(), "4");
    let reports = &first.reports;
    println!(
        "suite: exit {:?} and {:?}, {} reports, {:.0}s and {:.0}s",
        first.exit,
        second.exit,
        reports.len(),
        first.seconds,
        second.seconds
    );
    for r in reports.iter().filter(|r| !r.pass) {
        println!("  red scenario: {}", r.scenario);
    }

    let verdicts = [
        criterion_1(),
        criterion_2(&scenarios, reports),
        criterion_3(&scenarios, reports),
        criterion_4(&scenarios, reports),
        criterion_5(&scenarios, reports),
        criterion_6(&scenarios, reports),
        criterion_7(&scenarios, reports),
        criterion_8(&scenarios, reports),
        criterion_9(&first, &second),
    ];
    for v in &verdicts {
        println!(
            "{} criterion {}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.title,
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 && first.exit == Some(0) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
