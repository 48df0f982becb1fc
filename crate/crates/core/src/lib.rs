//! Two-type continuous-state branching processes in varying environments.
//!
//! The crate builds the process two ways and checks one against the other:
//!
//! * [`cumulant`] solves the backward cumulant system `v_{r,t}(λ)` (with
//!   environment atoms), which gives the Laplace transform
//!   `E_x exp(-<λ, X(t)>) = exp(-<x, v_{0,t}(λ)>)`;
//! * [`simulate`] runs the driving stochastic equations path by path.
//!
//! [`moments`], [`functionals`] and [`verify`] build on both.

pub mod config;
pub mod cumulant;
pub mod environment;
pub mod functionals;
pub mod moments;
pub mod ode;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use cumulant::{CumulantSolution, SolveError, SolverOptions};
pub use environment::{
    AtomJump, Component, ComponentKind, Density, DensityJump, EnvSpec, JumpKernel,
    SignedMeasure, SpatialMeasure, ValidationReport,
};
pub use functionals::{FunctionalSolution, WeightMeasure};
pub use moments::MomentCurve;
pub use simulate::{EnsembleStats, NoiseStream, SimError, SimOptions, SmallJumpMode, Trajectory};
pub use stats::{Estimate, Welford};
pub use verify::{Check, Gates, Scenario, VerdictReport};

/// A point of `R^2`, indexed by type (0 = type 1, 1 = type 2).
pub type Vec2 = [f64; 2];

/// The other type index.
#[inline]
pub(crate) fn other(i: usize) -> usize {
    1 - i
}

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
