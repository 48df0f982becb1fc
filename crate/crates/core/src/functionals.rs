//! Laplace functionals `E exp(-Σ_i ∫_[r,t] X_i(s) ζ_i(ds))`.
//!
//! `u_{r,t}` solves the cumulant system with `ζ_i'` added to `F_i`; at an
//! atom `s` of the environment or of `ζ` the atom map is applied to
//! `u_{s,t} + ζ({s})`. Then `w_{r,t} = u_{r,t}(0) + ζ({r})` and the
//! functional equals `exp(-<x, w_{r,t}>)` when `X(r) = x`.

use crate::cumulant::{
    atom_step, check_kernels, solve_system, BackwardSystem, CumulantSolution, SolveError,
    SolverOptions,
};
use crate::environment::{EnvSpec, Linear, SignedMeasure};
use crate::simulate::{
    build, check_state, par_paths, run, tags, NoiseStream, PlanRequest, SimError, SimOptions, Silent,
};
use crate::stats::{Estimate, Welford};
use crate::Vec2;

/// A nonnegative weight measure `ζ_i(ds)` per type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightMeasure {
    pub zeta: [SignedMeasure; 2],
}

impl WeightMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.zeta.iter().all(SignedMeasure::is_zero)
    }

    /// `ζ({s})`.
    pub fn atom_vec(&self, s: f64) -> Vec2 {
        [self.zeta[0].atom_at(s), self.zeta[1].atom_at(s)]
    }

    /// Atom times in `(r, t]`, increasing.
    pub fn atom_times(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .zeta
            .iter()
            .flat_map(|m| m.atoms.iter().map(|a| a.time))
            .filter(|&s| s > r && s <= t)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .zeta
            .iter()
            .flat_map(|m| m.density.breakpoints())
            .filter(|&s| s > r && s < t)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub(crate) fn pieces_on(&self, lo: f64, hi: f64) -> [Linear; 2] {
        [0, 1].map(|i| self.zeta[i].density.piece_on(lo, hi))
    }

    /// Problems that make the measure unusable, if any.
    pub fn check(&self, horizon: f64) -> Result<(), String> {
        for (i, m) in self.zeta.iter().enumerate() {
            if m.density.min_on(0.0, horizon) < 0.0 {
                return Err(format!("zeta_{} density is negative", i + 1));
            }
            if m.atoms.iter().any(|a| !(a.mass >= 0.0 && a.mass.is_finite())) {
                return Err(format!("zeta_{} has a negative or non-finite atom", i + 1));
            }
            if m.atoms.windows(2).any(|w| w[1].time <= w[0].time) {
                return Err(format!("zeta_{} atom times must increase", i + 1));
            }
        }
        Ok(())
    }
}

/// `u_{r,t}` together with the `ζ` atom at `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSolution {
    pub u: CumulantSolution,
    pub zeta_at_r: Vec2,
}

impl FunctionalSolution {
    /// `u_{r,t}`.
    pub fn u(&self) -> Vec2 {
        self.u.value()
    }

    /// `w_{r,t} = u_{r,t} + ζ({r})`.
    pub fn w(&self) -> Vec2 {
        let u = self.u();
        [u[0] + self.zeta_at_r[0], u[1] + self.zeta_at_r[1]]
    }
}

struct Functional<'a> {
    env: &'a EnvSpec,
    zeta: &'a WeightMeasure,
}

impl BackwardSystem for Functional<'_> {
    fn atom_times(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out = self.env.atom_times(r, t);
        out.extend(self.zeta.atom_times(r, t));
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out = self.env.breakpoints(r, t);
        out.extend(self.zeta.breakpoints(r, t));
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn rate<'a>(&'a self, lo: f64, hi: f64) -> Box<dyn Fn(f64, Vec2) -> Vec2 + 'a> {
        let coeffs = self.env.coefficients_on(lo, hi);
        let zeta = self.zeta.pieces_on(lo, hi);
        Box::new(move |s, v| match coeffs.cumulant_rate(s, v) {
            Ok(f) => [f[0] + zeta[0].at(s), f[1] + zeta[1].at(s)],
            Err(_) => [f64::NAN; 2],
        })
    }

    fn atom(&self, s: f64, right: Vec2) -> Result<Vec2, SolveError> {
        let z = self.zeta.atom_vec(s);
        atom_step(self.env, s, [right[0] + z[0], right[1] + z[1]])
    }
}

fn check_zeta(env: &EnvSpec, zeta: &WeightMeasure) -> Result<(), SolveError> {
    zeta.check(env.horizon).map_err(SolveError::Invalid)
}

/// `u_{s,t}` for `s ∈ [r, t]` with terminal value `λ`.
pub fn solve_functional(
    env: &EnvSpec,
    zeta: &WeightMeasure,
    r: f64,
    t: f64,
    lambda: Vec2,
    opts: &SolverOptions,
) -> Result<FunctionalSolution, SolveError> {
    check_kernels(env)?;
    check_zeta(env, zeta)?;
    let u = solve_system(&Functional { env, zeta }, r, t, lambda, opts, &[])?;
    Ok(FunctionalSolution {
        u,
        zeta_at_r: zeta.atom_vec(r),
    })
}

/// `w_{r,t}`, so that `E_{X(r)=x} exp(-Σ ∫_[r,t] X_i ζ_i(ds)) = exp(-<x, w>)`.
pub fn solve_w(
    env: &EnvSpec,
    zeta: &WeightMeasure,
    r: f64,
    t: f64,
    opts: &SolverOptions,
) -> Result<Vec2, SolveError> {
    Ok(solve_functional(env, zeta, r, t, [0.0, 0.0], opts)?.w())
}

/// Monte Carlo estimate of `E exp(-Σ_i ∫_[r,t] X_i(s) ζ_i(ds))` with
/// `X(r) = x0`: trapezoid sums on the densities, post-atom states at atoms.
#[allow(clippy::too_many_arguments)]
pub fn mc_functional(
    env: &EnvSpec,
    x0: Vec2,
    zeta: &WeightMeasure,
    r: f64,
    t: f64,
    n_paths: usize,
    opts: &SimOptions,
    noise: &NoiseStream,
) -> Result<Estimate, SimError> {
    check_state(x0)?;
    zeta.check(env.horizon).map_err(SimError::Invalid)?;
    if n_paths < 2 {
        return Err(SimError::Invalid("need at least 2 paths".into()));
    }
    let plan = build(
        &PlanRequest {
            env,
            r,
            t,
            checkpoints: &[],
            zeta: Some(zeta),
        },
        opts,
    )?;
    let acc = par_paths(
        n_paths,
        Welford::default,
        |path, acc| {
            let mut rng = noise.substream(tags::PATH, path);
            let end = run(&plan, x0, &mut rng, &mut Silent)?;
            acc.push((-end.functional).exp());
            Ok(())
        },
        |total, part| total.merge(&part),
    )?;
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::solve_backward;

    #[test]
    fn pure_accumulation() {
        let env = EnvSpec::zero(1.0);
        let mut zeta = WeightMeasure::zero();
        zeta.zeta[0] = SignedMeasure::constant(1.0);
        let sol = solve_functional(&env, &zeta, 0.0, 1.0, [0.0, 0.0], &SolverOptions::default())
            .unwrap();
        let at = sol.u.value_at(0.25).unwrap();
        assert!((at[0] - 0.75).abs() < 1e-12);
        assert_eq!(at[1], 0.0);
    }

    #[test]
    fn terminal_atom_reproduces_cumulant() {
        let mut env = EnvSpec::zero(1.0);
        env.b[0][0] = SignedMeasure::constant(1.0);
        env.c[0] = SignedMeasure::constant(0.5);
        let mut zeta = WeightMeasure::zero();
        zeta.zeta[0] = SignedMeasure::zero().with_atoms(&[(1.0, 2.0)]);
        let o = SolverOptions::default();
        let w = solve_w(&env, &zeta, 0.0, 1.0, &o).unwrap();
        let v = solve_backward(&env, 1.0, [2.0, 0.0], &o).unwrap().value();
        assert!((w[0] - v[0]).abs() < 1e-12);
    }

    #[test]
    fn atom_at_r_is_added() {
        let env = EnvSpec::zero(1.0);
        let mut zeta = WeightMeasure::zero();
        zeta.zeta[0] = SignedMeasure::zero().with_atoms(&[(0.3, 1.0)]);
        let w = solve_w(&env, &zeta, 0.3, 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(w, [1.0, 0.0]);
    }
}
