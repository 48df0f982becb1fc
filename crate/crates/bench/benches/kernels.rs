use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tcbve::cumulant::solve_backward;
use tcbve::moments::first_moment;
use tcbve::simulate::{simulate_ensemble, simulate_path};
use tcbve::verify::{random_env, suite};
use tcbve::{NoiseStream, SimOptions, SolverOptions};

fn cumulant(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("cumulant");
    for sc in suite().into_iter().filter(|s| ["feller", "atom-rich", "stable-axis"].contains(&s.name.as_str())) {
        group.bench_function(BenchmarkId::from_parameter(&sc.name), |b| {
            b.iter(|| solve_backward(&sc.env, sc.t, black_box([1.0, 2.0]), &opts).unwrap())
        });
    }
    let env = random_env(7);
    group.bench_function("random-env", |b| {
        b.iter(|| solve_backward(&env, 1.0, black_box([0.5, 0.5]), &opts).unwrap())
    });
    group.finish();
}

fn moments(c: &mut Criterion) {
    let env = random_env(7);
    c.bench_function("first-moment/random-env", |b| {
        b.iter(|| first_moment(&env, black_box([1.0, 1.0]), 1.0).unwrap())
    });
}

fn paths(c: &mut Criterion) {
    let noise = NoiseStream::new(1);
    let mut group = c.benchmark_group("simulate");
    for sc in suite().into_iter().filter(|s| ["feller", "dirac-cross-jumps"].contains(&s.name.as_str())) {
        let opts = SimOptions { step: 1e-3, ..sc.sim };
        group.bench_function(BenchmarkId::new("path", &sc.name), |b| {
            let mut id = 0;
            b.iter(|| {
                id += 1;
                simulate_path(&sc.env, sc.x0, sc.t, &opts, &noise, id).unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("ensemble-1000", &sc.name), |b| {
            b.iter(|| {
                simulate_ensemble(&sc.env, sc.x0, sc.t, &sc.checkpoints, &sc.lambda_grid, 1000, &opts, &noise).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = cumulant, moments, paths
}
criterion_main!(benches);
