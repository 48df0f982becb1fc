//! Spatial jump measures on `R_+^2 \ {0}` as finite mixtures of analytic
//! components.
//!
//! A component may carry a `cap`: it then stands for the image of the
//! uncapped measure under `z -> z ∧ cap` (coordinatewise), so mass beyond
//! the cap collapses onto the cap. This is the shape produced by large-jump
//! truncation and keeps every integral in closed form.

use statrs::function::gamma::{gamma, gamma_lr};
use thiserror::Error;

use crate::{dot, other, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentKind {
    /// Point mass at `z`.
    Dirac { z: Vec2 },
    /// Density `θ1 θ2 exp(-θ1 z1 - θ2 z2)`.
    ExpProduct { theta: Vec2, cap: Option<f64> },
    /// `z_axis^{-1-α} dz_axis` on one coordinate axis, `α ∈ (1, 2)`.
    StableAxis {
        axis: usize,
        alpha: f64,
        cap: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub kind: ComponentKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("uncompensated-stable: stable component on axis {axis} inside the kernel of type {kernel}")]
    UncompensatedStable { axis: usize, kernel: usize },
    #[error("infinite-mass component where a finite measure is required")]
    InfiniteMass,
}

/// `e^{-x} - 1 + x`, accurate for small `x`.
pub fn phi(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // alternating series x^2/2 - x^3/6 + ...
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut n = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            n += 1.0;
            term *= -x / n;
            sum += term;
        }
        sum
    } else {
        (-x).exp_m1() + x
    }
}

/// `Γ(-α) = Γ(2-α) / (α(α-1))` for `α ∈ (1,2)`.
pub fn stable_constant(alpha: f64) -> f64 {
    gamma(2.0 - alpha) / (alpha * (alpha - 1.0))
}

/// `∫_0^x (e^{-y} - 1 + y) y^{-1-α} dy`.
pub fn stable_partial(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= 2.0 {
        // termwise: sum_{n>=2} (-1)^n x^{n-α} / (n! (n-α))
        let mut pow_fact = x * x / 2.0;
        let mut sum = pow_fact / (2.0 - alpha);
        let mut n = 2.0;
        loop {
            n += 1.0;
            pow_fact *= -x / n;
            let term = pow_fact / (n - alpha);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum * x.powf(-alpha);
    }
    let s = 2.0 - alpha;
    let lower = gamma(s) * gamma_lr(s, x);
    let boundary = -phi(x) * x.powf(-alpha) / alpha;
    boundary + (lower + (-x).exp_m1() * x.powf(1.0 - alpha)) / (alpha * (alpha - 1.0))
}

/// `E exp(-λ (Z ∧ cap))` for `Z ~ Exp(θ)`.
fn capped_exp_laplace(theta: f64, lambda: f64, cap: Option<f64>) -> f64 {
    match cap {
        None => theta / (theta + lambda),
        Some(c) => {
            let tail = (-(theta + lambda) * c).exp();
            theta / (theta + lambda) * (1.0 - tail) + tail
        }
    }
}

fn capped_exp_mean(theta: f64, cap: Option<f64>) -> f64 {
    match cap {
        None => 1.0 / theta,
        Some(c) => -(-theta * c).exp_m1() / theta,
    }
}

impl Component {
    pub fn dirac(weight: f64, z: Vec2) -> Self {
        Component {
            weight,
            kind: ComponentKind::Dirac { z },
        }
    }

    pub fn exp_product(weight: f64, theta: Vec2) -> Self {
        Component {
            weight,
            kind: ComponentKind::ExpProduct { theta, cap: None },
        }
    }

    pub fn stable_axis(weight: f64, axis: usize, alpha: f64) -> Self {
        Component {
            weight,
            kind: ComponentKind::StableAxis {
                axis,
                alpha,
                cap: None,
            },
        }
    }

    /// Total mass (`+∞` for stable components).
    pub fn mass(&self) -> f64 {
        match self.kind {
            ComponentKind::StableAxis { .. } => f64::INFINITY,
            _ => self.weight,
        }
    }

    /// `∫ z_axis ν(dz)`.
    pub fn mean(&self, axis: usize) -> f64 {
        let w = self.weight;
        match self.kind {
            ComponentKind::Dirac { z } => w * z[axis],
            ComponentKind::ExpProduct { theta, cap } => w * capped_exp_mean(theta[axis], cap),
            ComponentKind::StableAxis { axis: a, .. } => {
                if a == axis {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ (z_i ∧ z_i^2 + z_j) ν(dz)`, the per-component form of the
    /// moment condition on the kernel of type `i`.
    pub fn moment_condition(&self, i: usize) -> f64 {
        let j = other(i);
        let w = self.weight;
        match self.kind {
            ComponentKind::Dirac { z } => w * (z[i].min(z[i] * z[i]) + z[j]),
            ComponentKind::ExpProduct { .. } => {
                // z ∧ z^2 <= z, and both means are finite
                self.mean(i) + self.mean(j)
            }
            ComponentKind::StableAxis { axis, alpha, cap } => {
                if axis != i {
                    return f64::INFINITY;
                }
                if !(alpha > 1.0 && alpha < 2.0) {
                    return f64::INFINITY;
                }
                // ∫_0^1 z^{1-α} + ∫_1^∞ z^{-α}, upper bound for the capped case
                let _ = cap;
                w * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0))
            }
        }
    }

    /// `∫ K_i(λ, z) ν(dz)` with `K_i(λ,z) = e^{-<λ,z>} - 1 + λ_i z_i`.
    pub fn k_integral(&self, i: usize, lambda: Vec2) -> Result<f64, KernelError> {
        let j = other(i);
        let w = self.weight;
        Ok(match self.kind {
            ComponentKind::Dirac { z } => {
                let own = lambda[i] * z[i];
                let cross = lambda[j] * z[j];
                w * (phi(own + cross) - cross)
            }
            ComponentKind::ExpProduct { theta, cap } => {
                let lap = capped_exp_laplace(theta[0], lambda[0], cap)
                    * capped_exp_laplace(theta[1], lambda[1], cap);
                w * (lap - 1.0 + lambda[i] * capped_exp_mean(theta[i], cap))
            }
            ComponentKind::StableAxis { axis, alpha, cap } => {
                if axis != i {
                    return Err(KernelError::UncompensatedStable { axis, kernel: i });
                }
                let l = lambda[axis].max(0.0);
                if l == 0.0 {
                    return Ok(0.0);
                }
                match cap {
                    None => w * stable_constant(alpha) * l.powf(alpha),
                    Some(c) => {
                        w * (l.powf(alpha) * stable_partial(alpha, l * c)
                            + c.powf(-alpha) / alpha * phi(l * c))
                    }
                }
            }
        })
    }

    /// `∫ (1 - e^{-<λ,z>}) ν(dz)`; finite-mass components only.
    pub fn laplace_deficit(&self, lambda: Vec2) -> Result<f64, KernelError> {
        let w = self.weight;
        match self.kind {
            ComponentKind::Dirac { z } => Ok(-w * (-dot(lambda, z)).exp_m1()),
            ComponentKind::ExpProduct { theta, cap } => Ok(w
                * (1.0
                    - capped_exp_laplace(theta[0], lambda[0], cap)
                        * capped_exp_laplace(theta[1], lambda[1], cap))),
            ComponentKind::StableAxis { .. } => Err(KernelError::InfiniteMass),
        }
    }

    /// `∫ (z_axis - k)^+ ν(dz)`.
    pub fn excess_mean(&self, axis: usize, k: f64) -> f64 {
        let w = self.weight;
        match self.kind {
            ComponentKind::Dirac { z } => w * (z[axis] - k).max(0.0),
            ComponentKind::ExpProduct { theta, cap } => {
                let th = theta[axis];
                match cap {
                    None => w * (-th * k).exp() / th,
                    Some(c) if k < c => w * ((-th * k).exp() - (-th * c).exp()) / th,
                    Some(_) => 0.0,
                }
            }
            ComponentKind::StableAxis { axis: a, alpha, cap } => {
                if a != axis {
                    return 0.0;
                }
                let denom = alpha * (alpha - 1.0);
                match cap {
                    None => w * k.powf(1.0 - alpha) / denom,
                    Some(c) if k < c => w * (k.powf(1.0 - alpha) - c.powf(1.0 - alpha)) / denom,
                    Some(_) => 0.0,
                }
            }
        }
    }

    /// Image under `z -> z ∧ k` coordinatewise.
    pub fn capped(&self, k: f64) -> Component {
        let merge = |cap: Option<f64>| Some(cap.map_or(k, |c| c.min(k)));
        let kind = match self.kind {
            ComponentKind::Dirac { z } => ComponentKind::Dirac {
                z: [z[0].min(k), z[1].min(k)],
            },
            ComponentKind::ExpProduct { theta, cap } => ComponentKind::ExpProduct {
                theta,
                cap: merge(cap),
            },
            ComponentKind::StableAxis { axis, alpha, cap } => ComponentKind::StableAxis {
                axis,
                alpha,
                cap: merge(cap),
            },
        };
        Component {
            weight: self.weight,
            kind,
        }
    }

    /// Largest coordinate the component can put mass on.
    pub fn max_size(&self) -> f64 {
        match self.kind {
            ComponentKind::Dirac { z } => z[0].max(z[1]),
            ComponentKind::ExpProduct { cap, .. } | ComponentKind::StableAxis { cap, .. } => {
                cap.unwrap_or(f64::INFINITY)
            }
        }
    }
}

/// A finite mixture of [`Component`]s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpatialMeasure {
    pub components: Vec<Component>,
}

impl SpatialMeasure {
    pub fn new(components: Vec<Component>) -> Self {
        SpatialMeasure { components }
    }

    pub fn single(component: Component) -> Self {
        SpatialMeasure {
            components: vec![component],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(Component::mass).sum()
    }

    pub fn mean(&self, axis: usize) -> f64 {
        self.components.iter().map(|c| c.mean(axis)).sum()
    }

    /// `∫ K_i(λ, z) ν(dz)`.
    pub fn k_integral(&self, i: usize, lambda: Vec2) -> Result<f64, KernelError> {
        self.components
            .iter()
            .try_fold(0.0, |acc, c| Ok(acc + c.k_integral(i, lambda)?))
    }

    pub fn laplace_deficit(&self, lambda: Vec2) -> Result<f64, KernelError> {
        self.components
            .iter()
            .try_fold(0.0, |acc, c| Ok(acc + c.laplace_deficit(lambda)?))
    }

    pub fn excess_mean(&self, axis: usize, k: f64) -> f64 {
        self.components.iter().map(|c| c.excess_mean(axis, k)).sum()
    }

    pub fn capped(&self, k: f64) -> SpatialMeasure {
        SpatialMeasure {
            components: self.components.iter().map(|c| c.capped(k)).collect(),
        }
    }

    pub fn has_stable(&self) -> bool {
        self.components
            .iter()
            .any(|c| matches!(c.kind, ComponentKind::StableAxis { .. }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn k_vanishes_at_zero() {
        let comps = [
            Component::dirac(0.7, [1.0, 2.0]),
            Component::exp_product(1.3, [2.0, 0.5]),
            Component::stable_axis(0.4, 0, 1.5),
        ];
        for c in comps {
            assert_eq!(c.k_integral(0, [0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn dirac_hand_value() {
        let k = Component::dirac(1.0, [1.0, 1.0])
            .k_integral(0, [1.0, 1.0])
            .unwrap();
        assert!((k - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn stable_hand_value() {
        // Γ(0.5) / (1.5 * 0.5) * 4^1.5
        let k = Component::stable_axis(1.0, 0, 1.5)
            .k_integral(0, [4.0, 0.0])
            .unwrap();
        let expected = PI.sqrt() / 0.75 * 8.0;
        assert!((k - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn stable_off_axis_is_rejected() {
        let err = Component::stable_axis(1.0, 1, 1.5).k_integral(0, [1.0, 1.0]);
        assert!(matches!(err, Err(KernelError::UncompensatedStable { .. })));
    }

    #[test]
    fn stable_partial_pieces_agree_at_switch() {
        for alpha in [1.1, 1.5, 1.9] {
            let below = stable_partial(alpha, 2.0);
            let above = stable_partial(alpha, 2.0 + 1e-12);
            assert!((below - above).abs() < 1e-10 * below, "{alpha}: {below} vs {above}");
            assert!(stable_partial(alpha, 1e6) < stable_constant(alpha));
            let x: f64 = 1e9;
            let tail = x.powf(1.0 - alpha) / (alpha - 1.0) - x.powf(-alpha) / alpha;
            let full = stable_partial(alpha, x) + tail;
            assert!((full - stable_constant(alpha)).abs() < 1e-9 * stable_constant(alpha));
        }
    }

    #[test]
    fn capping_large_cap_is_nearly_identity() {
        let c = Component::stable_axis(1.0, 0, 1.5);
        let capped = c.capped(1e8);
        let a = c.k_integral(0, [2.0, 0.0]).unwrap();
        let b = capped.k_integral(0, [2.0, 0.0]).unwrap();
        assert!(b < a && (a - b) / a < 1e-3);
    }

    #[test]
    fn excess_of_dirac_example() {
        // Dirac((3,0)) capped at 2 leaves excess 1 on axis 0
        let c = Component::dirac(1.0, [3.0, 0.0]);
        assert_eq!(c.excess_mean(0, 2.0), 1.0);
        assert_eq!(c.capped(2.0).kind, ComponentKind::Dirac { z: [2.0, 0.0] });
    }

    #[test]
    fn phi_branches_match() {
        for x in [0.05, 0.099_999, 0.1, 0.2] {
            let series_free = (-x as f64).exp_m1() + x;
            assert!((phi(x) - series_free).abs() < 1e-14 * x * x);
        }
    }
}
