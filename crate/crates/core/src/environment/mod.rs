//! The varying environment `(b, c, m)` of a two-type process.
//!
//! Index convention: `b[i][i]` is the diagonal drift `b_ii`, `b[i][j]` the
//! rate at which type `i` feeds type `j`, `c[i]` the diffusion and `m[i]`
//! the jump kernel of type `i`. Each measure is a time density plus a list
//! of atoms on `(0, ∞)`.

mod density;
mod spatial;
mod validate;

pub use density::{Density, Linear};
pub(crate) use density::split_at;
pub use spatial::{
    phi, stable_constant, stable_partial, Component, ComponentKind, KernelError, SpatialMeasure,
};
pub use validate::{ValidationReport, Violation};

use crate::{other, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub mass: f64,
}

/// A signed measure on the time axis: density plus atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    pub density: Density,
    pub atoms: Vec<Atom>,
}

impl SignedMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(rate: f64) -> Self {
        SignedMeasure {
            density: Density::Constant(rate),
            atoms: Vec::new(),
        }
    }

    pub fn with_atoms(mut self, atoms: &[(f64, f64)]) -> Self {
        self.atoms
            .extend(atoms.iter().map(|&(time, mass)| Atom { time, mass }));
        self.atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_zero() && self.atoms.iter().all(|a| a.mass == 0.0)
    }

    /// Mass of the atom at exactly `t`, or 0.
    pub fn atom_at(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.time == t)
            .map(|a| a.mass)
            .sum()
    }

    /// Signed mass of `(a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.density.integral(a, b)
            + self
                .atoms
                .iter()
                .filter(|x| x.time > a && x.time <= b)
                .map(|x| x.mass)
                .sum::<f64>()
    }

    /// Total variation on `(a, b]`.
    pub fn total_variation(&self, a: f64, b: f64) -> f64 {
        self.density.abs_integral(a, b)
            + self
                .atoms
                .iter()
                .filter(|x| x.time > a && x.time <= b)
                .map(|x| x.mass.abs())
                .sum::<f64>()
    }
}

/// A density part `rate(s) ds ν(dz)` of a jump kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityJump {
    pub rate: Density,
    pub measure: SpatialMeasure,
}

/// An atom part `δ_time(ds) ν(dz)` of a jump kernel; `ν` has finite mass.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomJump {
    pub time: f64,
    pub measure: SpatialMeasure,
}

/// A jump kernel `m_i(ds, dz)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpKernel {
    pub density_components: Vec<DensityJump>,
    pub atoms: Vec<AtomJump>,
}

impl JumpKernel {
    pub fn is_zero(&self) -> bool {
        self.density_components
            .iter()
            .all(|d| d.rate.is_zero() || d.measure.is_empty())
            && self.atoms.iter().all(|a| a.measure.is_empty())
    }

    /// Merged spatial measure of all atom parts at exactly `t`.
    pub fn atom_measure_at(&self, t: f64) -> SpatialMeasure {
        SpatialMeasure::new(
            self.atoms
                .iter()
                .filter(|a| a.time == t)
                .flat_map(|a| a.measure.components.iter().copied())
                .collect(),
        )
    }

    /// Time density of `∫ z_axis m(ds, dz)` over the density parts.
    pub fn mean_density(&self, axis: usize) -> Density {
        let terms: Vec<(f64, Density)> = self
            .density_components
            .iter()
            .map(|d| (d.measure.mean(axis), d.rate.clone()))
            .filter(|(k, _)| *k != 0.0)
            .collect();
        match terms.len() {
            0 => Density::zero(),
            _ => Density::Combination(terms),
        }
    }
}

/// Environment data merged at one atom time.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEvent {
    pub time: f64,
    /// `Δb[i][j]`
    pub b: [[f64; 2]; 2],
    /// `m_i({time}, dz)`
    pub m: [SpatialMeasure; 2],
}

impl AtomEvent {
    /// `δ_i = Δb_ii + ∫ z_i m_i({t}, dz)`.
    pub fn delta(&self, i: usize) -> f64 {
        self.b[i][i] + self.m[i].mean(i)
    }

    /// `Δb̄_ij = Δb_ij + ∫ z_j m_i({t}, dz)`.
    pub fn bar_b(&self, i: usize, j: usize) -> f64 {
        self.b[i][j] + self.m[i].mean(j)
    }
}

/// A two-type environment on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub b: [[SignedMeasure; 2]; 2],
    pub c: [SignedMeasure; 2],
    pub m: [JumpKernel; 2],
    pub horizon: f64,
}

impl EnvSpec {
    pub fn zero(horizon: f64) -> Self {
        EnvSpec {
            b: Default::default(),
            c: Default::default(),
            m: Default::default(),
            horizon,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// `δ_i(t)`; zero away from atoms.
    pub fn delta(&self, i: usize, t: f64) -> f64 {
        self.b[i][i].atom_at(t) + self.m[i].atom_measure_at(t).mean(i)
    }

    /// `b̄_ji = b_ji + ∫ z_i m_j`, `i != j`.
    pub fn bar_b(&self, j: usize, i: usize) -> SignedMeasure {
        assert_ne!(i, j, "bar_b is defined off the diagonal only");
        let base = &self.b[j][i];
        let extra = self.m[j].mean_density(i);
        let density = if extra.is_zero() {
            base.density.clone()
        } else if base.density.is_zero() {
            extra
        } else {
            Density::Combination(vec![(1.0, base.density.clone()), (1.0, extra)])
        };
        let mut atoms = base.atoms.clone();
        for a in &self.m[j].atoms {
            let mass = a.measure.mean(i);
            match atoms.iter_mut().find(|x| x.time == a.time) {
                Some(x) => x.mass += mass,
                None => atoms.push(Atom {
                    time: a.time,
                    mass,
                }),
            }
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        SignedMeasure { density, atoms }
    }

    /// All atom times of `b` and `m` in `(r, t]`, strictly increasing.
    pub fn atom_times(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .b
            .iter()
            .flatten()
            .flat_map(|m| m.atoms.iter().map(|a| a.time))
            .chain(
                self.m
                    .iter()
                    .flat_map(|k| k.atoms.iter().map(|a| a.time)),
            )
            .filter(|&s| s > r && s <= t)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn atom_event(&self, s: f64) -> AtomEvent {
        let mut b = [[0.0; 2]; 2];
        for (i, row) in b.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.b[i][j].atom_at(s);
            }
        }
        AtomEvent {
            time: s,
            b,
            m: [self.m[0].atom_measure_at(s), self.m[1].atom_measure_at(s)],
        }
    }

    /// Merged atom data in `(r, t]`.
    pub fn atom_schedule(&self, r: f64, t: f64) -> Vec<AtomEvent> {
        self.atom_times(r, t)
            .into_iter()
            .map(|s| self.atom_event(s))
            .filter(|e| !e.is_trivial())
            .collect()
    }

    /// Density breakpoints strictly inside `(r, t)`.
    pub fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .densities()
            .flat_map(|d| d.breakpoints())
            .filter(|&s| s > r && s < t)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn densities(&self) -> impl Iterator<Item = &Density> {
        self.b
            .iter()
            .flatten()
            .chain(self.c.iter())
            .map(|m| &m.density)
            .chain(
                self.m
                    .iter()
                    .flat_map(|k| k.density_components.iter().map(|d| &d.rate)),
            )
    }

    /// Linear pieces of every density on `(lo, hi)`, which must not
    /// contain a breakpoint.
    pub fn coefficients_on(&self, lo: f64, hi: f64) -> Coefficients<'_> {
        let piece = |m: &SignedMeasure| m.density.piece_on(lo, hi);
        Coefficients {
            b: [
                [piece(&self.b[0][0]), piece(&self.b[0][1])],
                [piece(&self.b[1][0]), piece(&self.b[1][1])],
            ],
            c: [piece(&self.c[0]), piece(&self.c[1])],
            jumps: [0, 1].map(|i| {
                self.m[i]
                    .density_components
                    .iter()
                    .filter(|d| !d.measure.is_empty())
                    .map(|d| (d.rate.piece_on(lo, hi), &d.measure))
                    .filter(|(p, _)| p.value != 0.0 || p.slope != 0.0)
                    .collect()
            }),
        }
    }

    /// True when there is no diffusion and no jump part, so paths are
    /// deterministic.
    pub fn is_deterministic(&self) -> bool {
        self.c.iter().all(SignedMeasure::is_zero) && self.m.iter().all(JumpKernel::is_zero)
    }

    pub fn has_diffusion(&self) -> bool {
        !self.c.iter().all(SignedMeasure::is_zero)
    }
}

/// Density values frozen to one segment between breakpoints.
#[derive(Debug, Clone)]
pub struct Coefficients<'a> {
    pub b: [[Linear; 2]; 2],
    pub c: [Linear; 2],
    pub jumps: [Vec<(Linear, &'a SpatialMeasure)>; 2],
}

impl Coefficients<'_> {
    /// `Σ ṁ(s) ∫ K_i(λ, z) ν(dz)` for the kernel of type `i`.
    pub fn k_rate(&self, i: usize, s: f64, lambda: Vec2) -> Result<f64, KernelError> {
        let mut total = 0.0;
        for (rate, measure) in &self.jumps[i] {
            total += rate.at(s) * measure.k_integral(i, lambda)?;
        }
        Ok(total)
    }

    /// Right-hand side of the backward cumulant system between atoms:
    /// `F_i = v_j b_ij' - v_i b_ii' - c_i' v_i^2 - Σ ṁ ∫K_i(v, z) ν`.
    pub fn cumulant_rate(&self, s: f64, v: Vec2) -> Result<Vec2, KernelError> {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            let j = other(i);
            *o = v[j] * self.b[i][j].at(s)
                - v[i] * self.b[i][i].at(s)
                - self.c[i].at(s) * v[i] * v[i]
                - self.k_rate(i, s, v)?;
        }
        Ok(out)
    }
}

impl AtomEvent {
    fn is_trivial(&self) -> bool {
        self.b.iter().flatten().all(|x| *x == 0.0) && self.m.iter().all(SpatialMeasure::is_empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_sums_drift_and_jump_atoms() {
        let mut env = EnvSpec::zero(2.0);
        env.b[0][0] = SignedMeasure::zero().with_atoms(&[(1.0, 0.3)]);
        env.m[0].atoms.push(AtomJump {
            time: 1.0,
            measure: SpatialMeasure::single(Component::dirac(0.5, [1.0, 0.0])),
        });
        assert!((env.delta(0, 1.0) - 0.8).abs() < 1e-15);
        assert_eq!(env.delta(0, 0.7), 0.0);
        assert_eq!(env.delta(1, 1.0), 0.0);
    }

    #[test]
    fn bar_b_adds_cross_means() {
        let mut env = EnvSpec::zero(1.0);
        env.m[1].density_components.push(DensityJump {
            rate: Density::Constant(1.0),
            measure: SpatialMeasure::single(Component::exp_product(1.0, [2.0, 1.0])),
        });
        let bb = env.bar_b(1, 0);
        assert!((bb.density.eval(0.3) - 0.5).abs() < 1e-15);

        env.b[0][1] = SignedMeasure::zero().with_atoms(&[(0.4, 0.1)]);
        env.m[0].atoms.push(AtomJump {
            time: 0.4,
            measure: SpatialMeasure::single(Component::dirac(0.2, [0.0, 3.0])),
        });
        assert!((env.bar_b(0, 1).atom_at(0.4) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn schedule_is_half_open_and_merged() {
        let mut env = EnvSpec::zero(1.0);
        env.b[0][0] = SignedMeasure::zero().with_atoms(&[(0.5, 0.2), (0.9, 0.1)]);
        env.m[1].atoms.push(AtomJump {
            time: 0.5,
            measure: SpatialMeasure::single(Component::dirac(1.0, [0.0, 1.0])),
        });
        let all = env.atom_schedule(0.0, 1.0);
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].b[0][0], 0.2);
        assert_eq!(all[0].m[1].components.len(), 1);
        let late = env.atom_schedule(0.6, 1.0);
        assert_eq!(late.iter().map(|e| e.time).collect::<Vec<_>>(), vec![0.9]);
        assert!(EnvSpec::zero(1.0).atom_schedule(0.0, 1.0).is_empty());
    }
}
