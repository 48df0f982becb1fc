use rayon::prelude::*;
use serde::Serialize;

use super::path::Observer;
use super::{build, check_state, run, tags, NoiseStream, PlanRequest, SimError, SimOptions};
use crate::environment::EnvSpec;
use crate::stats::{Estimate, Welford};
use crate::{dot, Vec2};

/// Paths per work unit; fixed so reductions do not depend on threads.
const CHUNK: usize = 256;

/// Run `per_path` for paths `0..n` in fixed chunks and merge the chunk
/// accumulators in chunk order.
pub(crate) fn par_paths<A, I, F, M>(n: usize, init: I, per_path: F, merge: M) -> Result<A, SimError>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<(), SimError> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for path in c * CHUNK..((c + 1) * CHUNK).min(n) {
                per_path(path as u64, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_, SimError>>()?;
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceEstimate {
    pub lambda: Vec2,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub t: f64,
    pub mean: [Estimate; 2],
    pub variance: Vec2,
    /// `Ê exp(-<λ, X(t)>)` for each `λ` of the grid.
    pub laplace: Vec<LaplaceEstimate>,
    /// Fraction of paths at `(0, 0)`.
    pub extinct: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub checkpoints: Vec<CheckpointStats>,
    /// Fraction of paths at `(0, 0)` at the final time.
    pub extinction: Estimate,
}

struct Collect<'a> {
    states: &'a mut [Vec2],
}

impl Observer for Collect<'_> {
    fn checkpoint(&mut self, k: usize, x: Vec2) {
        self.states[k] = x;
    }
}

/// Monte Carlo moments, Laplace transforms and extinction frequencies of
/// `X` started at `x0`, at each checkpoint in `[0, t]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ensemble(
    env: &EnvSpec,
    x0: Vec2,
    t: f64,
    checkpoints: &[f64],
    lambda_grid: &[Vec2],
    n_paths: usize,
    opts: &SimOptions,
    noise: &NoiseStream,
) -> Result<EnsembleStats, SimError> {
    check_state(x0)?;
    if n_paths < 2 {
        return Err(SimError::Invalid("need at least 2 paths".into()));
    }
    let plan = build(
        &PlanRequest {
            env,
            r: 0.0,
            t,
            checkpoints,
            zeta: None,
        },
        opts,
    )?;
    let n_cp = checkpoints.len();
    let n_l = lambda_grid.len();
    // per checkpoint: x1, x2, laplace..., extinct; then final extinction
    let width = 3 + n_l;
    let slots = n_cp * width + 1;

    let acc = par_paths(
        n_paths,
        || vec![Welford::default(); slots],
        |path, acc| {
            let mut states = vec![[0.0; 2]; n_cp];
            let mut rng = noise.substream(tags::PATH, path);
            let end = run(&plan, x0, &mut rng, &mut Collect { states: &mut states })?;
            for (k, x) in states.iter().enumerate() {
                let row = &mut acc[k * width..(k + 1) * width];
                row[0].push(x[0]);
                row[1].push(x[1]);
                for (l, lambda) in lambda_grid.iter().enumerate() {
                    row[2 + l].push((-dot(*lambda, *x)).exp());
                }
                row[2 + n_l].push(extinct(*x));
            }
            acc[slots - 1].push(extinct(end.x));
            Ok(())
        },
        |total, part| {
            for (a, b) in total.iter_mut().zip(&part) {
                a.merge(b);
            }
        },
    )?;

    let checkpoints = checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let row = &acc[k * width..(k + 1) * width];
            CheckpointStats {
                t,
                mean: [row[0].estimate(), row[1].estimate()],
                variance: [row[0].variance(), row[1].variance()],
                laplace: lambda_grid
                    .iter()
                    .enumerate()
                    .map(|(l, &lambda)| LaplaceEstimate {
                        lambda,
                        estimate: row[2 + l].estimate(),
                    })
                    .collect(),
                extinct: row[2 + n_l].estimate(),
            }
        })
        .collect();
    Ok(EnsembleStats {
        n_paths,
        checkpoints,
        extinction: acc[slots - 1].estimate(),
    })
}

fn extinct(x: Vec2) -> f64 {
    if x == [0.0, 0.0] {
        1.0
    } else {
        0.0
    }
}

/// Fraction of paths with `X(t) = (0, 0)`, with its standard error.
pub fn extinction_frequency(
    env: &EnvSpec,
    x0: Vec2,
    t: f64,
    n_paths: usize,
    opts: &SimOptions,
    noise: &NoiseStream,
) -> Result<Estimate, SimError> {
    Ok(simulate_ensemble(env, x0, t, &[], &[], n_paths, opts, noise)?.extinction)
}
