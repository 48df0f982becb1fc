//! Path simulation of the driving stochastic equations.
//!
//! Time is split at every atom, density breakpoint and checkpoint, and
//! each piece is cut into equal steps of length at most `h`. Within a
//! step the linear drift is applied exactly, diffusion by one draw with
//! variance proportional to the state (Gaussian away from zero, the
//! driftless Feller law near it), and jumps through one exponential clock
//! per kernel. Environment atoms use their conditional law directly.
//! Negative excursions are clamped to zero, and `(0, 0)` is absorbing.

mod coupling;
mod ensemble;
mod noise;
mod path;
mod plan;
mod truncate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvSpec, KernelError};
use crate::Vec2;

pub use coupling::{coupled_pair, CoupledPair};
pub use ensemble::{
    extinction_frequency, simulate_ensemble, CheckpointStats, EnsembleStats, LaplaceEstimate,
};
pub use noise::{tags, NoiseStream};
pub use truncate::truncate_large_jumps;

pub(crate) use ensemble::par_paths;
pub(crate) use path::{run, Silent};
pub(crate) use plan::{build, PlanRequest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("step-overflow: {expected:.1} expected jumps in the step at s={at}; reduce the step")]
    StepOverflow { at: f64, expected: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Treatment of stable jumps below the threshold `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpMode {
    /// Drop the compensated small-jump martingale.
    #[default]
    DropMartingale,
    /// Replace it by a Gaussian term with the same variance.
    GaussianApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Step length `h`.
    pub step: f64,
    /// Small-jump threshold `ε` for stable components.
    pub epsilon: f64,
    pub small_jumps: SmallJumpMode,
    /// Width `δu` of the state bins shared by coupled diffusions.
    pub bin_width: f64,
    /// Guard on the expected number of jumps in one step.
    pub max_jumps_per_step: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            step: 1e-3,
            epsilon: 0.01,
            small_jumps: SmallJumpMode::DropMartingale,
            bin_width: 1e-3,
            max_jumps_per_step: 1e5,
        }
    }
}

impl SimOptions {
    pub(crate) fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.step) && ok(self.epsilon) && ok(self.bin_width) && self.max_jumps_per_step > 0.0 {
            Ok(())
        } else {
            Err(SimError::Invalid(
                "step, epsilon, bin width and jump guard must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec2,
    /// `X(t-)`; equal to `x` off atoms.
    pub left: Vec2,
    pub is_atom: bool,
}

/// A simulated path on its step mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// First mesh time with `X = (0, 0)`.
    pub absorbed_at: Option<f64>,
}

impl Trajectory {
    pub fn terminal(&self) -> Vec2 {
        self.points.last().map(|p| p.x).unwrap_or([0.0, 0.0])
    }

    fn push(&mut self, t: f64, left: Vec2, x: Vec2, is_atom: bool) {
        if self.absorbed_at.is_none() && x == [0.0, 0.0] {
            self.absorbed_at = Some(t);
        }
        self.points.push(TrajectoryPoint { t, x, left, is_atom });
    }
}

struct Recorder<'a>(&'a mut Trajectory);

impl path::Observer for Recorder<'_> {
    fn step(&mut self, t: f64, x: Vec2) {
        self.0.push(t, x, x, false);
    }

    fn atom(&mut self, t: f64, left: Vec2, x: Vec2) {
        self.0.push(t, left, x, true);
    }
}

/// One path on `[0, t]` from `x0`, drawn from the substream of `path_id`.
pub fn simulate_path(
    env: &EnvSpec,
    x0: Vec2,
    t: f64,
    opts: &SimOptions,
    noise: &NoiseStream,
    path_id: u64,
) -> Result<Trajectory, SimError> {
    check_state(x0)?;
    let plan = build(
        &PlanRequest {
            env,
            r: 0.0,
            t,
            checkpoints: &[],
            zeta: None,
        },
        opts,
    )?;
    let mut traj = Trajectory::default();
    traj.push(0.0, x0, x0, false);
    let mut rng = noise.substream(tags::PATH, path_id);
    run(&plan, x0, &mut rng, &mut Recorder(&mut traj))?;
    Ok(traj)
}

/// `X(s)` from `X(s-)` across the environment atom at `s`.
pub fn simulate_atom<R: rand::Rng>(
    env: &EnvSpec,
    s: f64,
    x_left: Vec2,
    rng: &mut R,
) -> Result<Vec2, SimError> {
    check_state(x_left)?;
    let ev = env.atom_event(s);
    Ok(plan::AtomPlan::new(&ev)?.apply(x_left, rng))
}

pub(crate) fn check_state(x: Vec2) -> Result<(), SimError> {
    if x.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(SimError::Invalid(format!("initial state must be >= 0, got {x:?}")))
    }
}
