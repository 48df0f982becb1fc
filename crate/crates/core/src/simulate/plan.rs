//! Step plan shared read-only by every path of a run.
//!
//! Over one step `(s0, s1]` the state moves as `X <- P X + noise + jumps`,
//! where `P = exp(∫ A ds)` and
//! `A = [[-(b_11' + κ_1), b_21'], [b_12', -(b_22' + κ_2)]]`. Here `κ_i` is
//! the compensator of the own-coordinate jumps of `m_i`. Jump counts and
//! noise variance are driven by the step average `X̄ = D X` of the linear
//! flow, `D = (1/h) ∫_0^h exp(sA) ds`, so that the compensator and the
//! jumps it compensates see the same state. Each event of `m_p` adds its
//! whole mark `z`; the own coordinate is compensated through `κ`, the
//! cross coordinate is not.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use super::{SimError, SimOptions, SmallJumpMode};
use crate::environment::{AtomEvent, ComponentKind, EnvSpec, Linear, SpatialMeasure};
use crate::functionals::WeightMeasure;
use crate::{other, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Sampler {
    Dirac { z: Vec2 },
    Exp { theta: Vec2, cap: f64 },
    /// Stable jumps above `eps` on `axis`, capped.
    StableBig {
        axis: usize,
        alpha: f64,
        eps: f64,
        cap: f64,
    },
}

impl Sampler {
    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        match *self {
            Sampler::Dirac { z } => z,
            Sampler::Exp { theta, cap } => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                [(a / theta[0]).min(cap), (b / theta[1]).min(cap)]
            }
            Sampler::StableBig {
                axis,
                alpha,
                eps,
                cap,
            } => {
                let u: f64 = rng.random();
                let size = (eps * (1.0 - u).powf(-1.0 / alpha)).min(cap);
                let mut z = [0.0; 2];
                z[axis] = size;
                z
            }
        }
    }
}

/// Per-unit-rate data of one density component of a kernel.
#[derive(Debug, Clone, Default)]
struct ComponentRates {
    /// `(sampler index, mass)` for the samplers this component feeds.
    samplers: Vec<(usize, f64)>,
    /// Own-coordinate compensator of the simulated jumps.
    kappa: f64,
    /// Variance of the Gaussian small-jump substitute, per unit state.
    gauss: f64,
}

#[derive(Debug, Clone)]
struct Channel {
    samplers: Vec<Sampler>,
    components: Vec<ComponentRates>,
}

fn channel(measures: &[&SpatialMeasure], p: usize, opts: &SimOptions) -> Channel {
    let mut samplers = Vec::new();
    let mut components = Vec::new();
    for measure in measures {
        let mut rates = ComponentRates::default();
        for c in &measure.components {
            let w = c.weight;
            match c.kind {
                ComponentKind::Dirac { z } => {
                    rates.samplers.push((samplers.len(), w));
                    samplers.push(Sampler::Dirac { z });
                    rates.kappa += c.mean(p);
                }
                ComponentKind::ExpProduct { theta, cap } => {
                    rates.samplers.push((samplers.len(), w));
                    samplers.push(Sampler::Exp {
                        theta,
                        cap: cap.unwrap_or(f64::INFINITY),
                    });
                    rates.kappa += c.mean(p);
                }
                ComponentKind::StableAxis { axis, alpha, cap } => {
                    let cap = cap.unwrap_or(f64::INFINITY);
                    let eps = opts.epsilon.min(cap);
                    rates.samplers.push((samplers.len(), w * eps.powf(-alpha) / alpha));
                    samplers.push(Sampler::StableBig {
                        axis,
                        alpha,
                        eps,
                        cap,
                    });
                    // ∫_(eps,∞) (z ∧ cap) ν(dz)
                    let tail = if cap.is_finite() {
                        (eps.powf(1.0 - alpha) - cap.powf(1.0 - alpha)) / (alpha - 1.0)
                            + cap.powf(1.0 - alpha) / alpha
                    } else {
                        eps.powf(1.0 - alpha) / (alpha - 1.0)
                    };
                    rates.kappa += w * tail;
                    if opts.small_jumps == SmallJumpMode::GaussianApprox {
                        rates.gauss += w * eps.powf(2.0 - alpha) / (2.0 - alpha);
                    }
                }
            }
        }
        components.push(rates);
    }
    Channel {
        samplers,
        components,
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub t0: f64,
    pub t1: f64,
    pub prop: [[f64; 2]; 2],
    /// Step average of the linear flow.
    pub dwell: [[f64; 2]; 2],
    /// Noise variance per unit state.
    pub var: Vec2,
    /// Jump intensity per unit state, integrated over the step.
    pub rate: Vec2,
    /// Offsets of the cumulative sampler intensities in [`SimPlan::cum`].
    pub cum: [usize; 2],
    /// `ζ'` at both ends when a functional is accumulated.
    pub zeta: Option<[Vec2; 2]>,
}

#[derive(Debug, Clone)]
pub(crate) struct AtomChannel {
    pub mass: f64,
    /// `(cumulative weight, sampler)`.
    pub samplers: Vec<(f64, Sampler)>,
}

#[derive(Debug, Clone)]
pub(crate) struct AtomPlan {
    pub time: f64,
    /// `1 - δ_i`
    pub keep: Vec2,
    /// `Δb_ji`, the deterministic inflow into type `i`.
    pub inflow: Vec2,
    pub channels: [AtomChannel; 2],
}

impl AtomPlan {
    pub(crate) fn new(ev: &AtomEvent) -> Result<Self, SimError> {
        let channels = [0, 1].map(|p| {
            let mut acc = 0.0;
            let mut samplers = Vec::new();
            for c in &ev.m[p].components {
                let s = match c.kind {
                    ComponentKind::Dirac { z } => Sampler::Dirac { z },
                    ComponentKind::ExpProduct { theta, cap } => Sampler::Exp {
                        theta,
                        cap: cap.unwrap_or(f64::INFINITY),
                    },
                    ComponentKind::StableAxis { .. } => return None,
                };
                acc += c.weight;
                samplers.push((acc, s));
            }
            Some(AtomChannel { mass: acc, samplers })
        });
        let [Some(c0), Some(c1)] = channels else {
            return Err(SimError::Invalid(format!(
                "atom at t={} carries an infinite-mass component",
                ev.time
            )));
        };
        Ok(AtomPlan {
            time: ev.time,
            keep: [1.0 - ev.delta(0), 1.0 - ev.delta(1)],
            inflow: [ev.b[1][0], ev.b[0][1]],
            channels: [c0, c1],
        })
    }

    /// `X_i(s) = X_i(s-)(1 - δ_i) + X_j(s-) Δb_ji + Σ_p Σ_k z_i^{(p,k)}`.
    pub(crate) fn apply<R: Rng + ?Sized>(&self, x: Vec2, rng: &mut R) -> Vec2 {
        let mut y = [0, 1].map(|i| x[i] * self.keep[i] + x[other(i)] * self.inflow[i]);
        for (p, ch) in self.channels.iter().enumerate() {
            let mean = x[p] * ch.mass;
            if mean <= 0.0 {
                continue;
            }
            let n = Poisson::new(mean).expect("finite positive mean").sample(rng) as u64;
            for _ in 0..n {
                let z = pick_weighted(&ch.samplers, ch.mass, rng).sample(rng);
                y[0] += z[0];
                y[1] += z[1];
            }
        }
        y.map(|v| v.max(0.0))
    }
}

pub(crate) fn pick_weighted<R: Rng + ?Sized>(table: &[(f64, Sampler)], total: f64, rng: &mut R) -> Sampler {
    if table.len() == 1 {
        return table[0].1;
    }
    let u = rng.random::<f64>() * total;
    table
        .iter()
        .find(|(c, _)| *c > u)
        .unwrap_or(&table[table.len() - 1])
        .1
}

#[derive(Debug, Clone)]
pub(crate) enum Item {
    Step(Step),
    Atom(AtomPlan),
    ZetaAtom(Vec2),
    Checkpoint(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct SimPlan {
    pub items: Vec<Item>,
    pub samplers: [Vec<Sampler>; 2],
    pub cum: Vec<f64>,
    pub has_jumps: [bool; 2],
    pub max_jumps_per_step: f64,
}

impl SimPlan {
    /// Draw the mark of one density-part event of channel `p` in `step`.
    #[inline]
    pub(crate) fn pick<R: Rng + ?Sized>(&self, p: usize, step: &Step, rng: &mut R) -> Vec2 {
        let samplers = &self.samplers[p];
        if samplers.len() == 1 {
            return samplers[0].sample(rng);
        }
        let cum = &self.cum[step.cum[p]..step.cum[p] + samplers.len()];
        let u = rng.random::<f64>() * step.rate[p];
        let k = cum.iter().position(|c| *c > u).unwrap_or(samplers.len() - 1);
        samplers[k].sample(rng)
    }
}

/// `exp(M)` for a 2x2 matrix with `M_01 M_10 >= 0`.
pub(crate) fn expm2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let s = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    let q2 = (d * d + m[0][1] * m[1][0]).max(0.0);
    let q = q2.sqrt();
    let ch = q.cosh();
    let sh = if q < 1e-6 { 1.0 + q2 / 6.0 } else { q.sinh() / q };
    let e = s.exp();
    [
        [e * (ch + sh * d), e * sh * m[0][1]],
        [e * sh * m[1][0], e * (ch - sh * d)],
    ]
}

/// `M x`.
#[inline]
pub(crate) fn apply(m: &[[f64; 2]; 2], x: Vec2) -> Vec2 {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

pub(crate) struct PlanRequest<'a> {
    pub env: &'a EnvSpec,
    pub r: f64,
    pub t: f64,
    pub checkpoints: &'a [f64],
    pub zeta: Option<&'a WeightMeasure>,
}

pub(crate) fn build(req: &PlanRequest<'_>, opts: &SimOptions) -> Result<SimPlan, SimError> {
    opts.validate()?;
    let env = req.env;
    let (r, t) = (req.r, req.t);
    if !(r.is_finite() && t.is_finite() && r <= t) {
        return Err(SimError::Invalid(format!("need r <= t, got r={r}, t={t}")));
    }
    if req.checkpoints.windows(2).any(|w| w[1] <= w[0])
        || req.checkpoints.iter().any(|&c| c < r || c > t)
    {
        return Err(SimError::Invalid(format!(
            "checkpoints must be strictly increasing inside [{r}, {t}]"
        )));
    }
    for i in 0..2 {
        for d in &env.m[i].density_components {
            d.measure.k_integral(i, [0.0, 0.0])?;
        }
    }

    let channels = [0, 1].map(|p| {
        let measures: Vec<&SpatialMeasure> =
            env.m[p].density_components.iter().map(|d| &d.measure).collect();
        channel(&measures, p, opts)
    });

    let env_atoms = env.atom_times(r, t);
    let zeta_atoms = req.zeta.map(|z| z.atom_times(r, t)).unwrap_or_default();
    let mut points: Vec<f64> = env_atoms
        .iter()
        .chain(&zeta_atoms)
        .copied()
        .chain(env.breakpoints(r, t))
        .chain(req.zeta.map(|z| z.breakpoints(r, t)).unwrap_or_default())
        .chain(req.checkpoints.iter().copied())
        .filter(|&s| s > r && s < t)
        .collect();
    points.push(t);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut items = Vec::new();
    let mut cum = Vec::new();
    let emit_marks = |items: &mut Vec<Item>, s: f64, with_env_atom: bool| -> Result<(), SimError> {
        if with_env_atom && env_atoms.contains(&s) {
            let ev = env.atom_event(s);
            items.push(Item::Atom(AtomPlan::new(&ev)?));
        }
        if let Some(z) = req.zeta {
            let mass = z.atom_vec(s);
            if mass != [0.0, 0.0] {
                items.push(Item::ZetaAtom(mass));
            }
        }
        if let Some(k) = req.checkpoints.iter().position(|&c| c == s) {
            items.push(Item::Checkpoint(k));
        }
        Ok(())
    };
    // the process starts at r: no environment atom there
    emit_marks(&mut items, r, false)?;

    let mut lo = r;
    for &hi in &points {
        if hi <= lo {
            continue;
        }
        let coeffs = env.coefficients_on(lo, hi);
        let rate_pieces: [Vec<Linear>; 2] = [0, 1].map(|p| {
            env.m[p]
                .density_components
                .iter()
                .map(|d| d.rate.piece_on(lo, hi))
                .collect()
        });
        let zeta_pieces = req.zeta.map(|z| z.pieces_on(lo, hi));
        let n = (((hi - lo) / opts.step) - 1e-9).ceil().max(1.0) as usize;
        let dt = (hi - lo) / n as f64;
        for k in 0..n {
            let t0 = lo + k as f64 * dt;
            let t1 = if k + 1 == n { hi } else { lo + (k + 1) as f64 * dt };
            let mut rate = [0.0; 2];
            let mut kappa = [0.0; 2];
            let mut var = [0.0; 2];
            let mut offsets = [0usize; 2];
            for p in 0..2 {
                let ch = &channels[p];
                offsets[p] = cum.len();
                let mut per_sampler = vec![0.0; ch.samplers.len()];
                for (comp, piece) in ch.components.iter().zip(&rate_pieces[p]) {
                    let mass = piece.integral(t0, t1);
                    if mass == 0.0 {
                        continue;
                    }
                    kappa[p] += mass * comp.kappa;
                    var[p] += mass * comp.gauss;
                    for &(idx, m) in &comp.samplers {
                        per_sampler[idx] += mass * m;
                    }
                }
                let mut acc = 0.0;
                for v in per_sampler {
                    acc += v;
                    cum.push(acc);
                }
                rate[p] = acc;
                var[p] += 2.0 * coeffs.c[p].integral(t0, t1);
            }
            let b = |i: usize, j: usize| coeffs.b[i][j].integral(t0, t1);
            let a = [
                [-(b(0, 0) + kappa[0]), b(1, 0)],
                [b(0, 1), -(b(1, 1) + kappa[1])],
            ];
            let prop = expm2(a);
            let half = expm2(a.map(|row| row.map(|v| 0.5 * v)));
            let dwell = [0, 1].map(|i| {
                [0, 1].map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    (id + 4.0 * half[i][j] + prop[i][j]) / 6.0
                })
            });
            let zeta = zeta_pieces.map(|z| {
                [
                    [z[0].at(t0), z[1].at(t0)],
                    [z[0].at(t1), z[1].at(t1)],
                ]
            });
            items.push(Item::Step(Step {
                t0,
                t1,
                prop,
                dwell,
                var,
                rate,
                cum: offsets,
                zeta,
            }));
        }
        emit_marks(&mut items, hi, true)?;
        lo = hi;
    }

    let has_jumps = [0, 1].map(|p| !channels[p].samplers.is_empty());
    Ok(SimPlan {
        items,
        samplers: channels.map(|c| c.samplers),
        cum,
        has_jumps,
        max_jumps_per_step: opts.max_jumps_per_step,
    })
}
