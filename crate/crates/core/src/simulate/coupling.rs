//! Two copies of the process driven by common noise.
//!
//! Jumps are shared marks `(z, u)`, `u ~ U(0, u_max)`, with `u_max` the
//! larger of the two step-averaged states; a copy accepts a mark iff `u`
//! lies below its own. The state-indexed white noise is binned with width `δu`:
//! both copies share one Brownian motion in `u` up to their own bin
//! boundary, and each adds an independent draw for its fractional bin.
//! Without diffusion the coupling preserves order exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::plan::{apply, pick_weighted, AtomPlan, Item, SimPlan, Step};
use super::{build, check_state, tags, NoiseStream, PlanRequest, SimError, SimOptions, Trajectory};
use crate::environment::EnvSpec;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub low: Trajectory,
    pub high: Trajectory,
    /// Mesh points where `low > high` in some coordinate.
    pub order_violations: usize,
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    }
}

struct Pair<'a> {
    plan: &'a SimPlan,
    bin: f64,
    shared: ChaCha8Rng,
    own: [ChaCha8Rng; 2],
}

impl Pair<'_> {
    fn step(&mut self, st: &Step, x: [Vec2; 2]) -> Result<[Vec2; 2], SimError> {
        let mut y = x.map(|s| apply(&st.prop, s));
        let xb = x.map(|s| apply(&st.dwell, s));
        for p in 0..2 {
            let umax = xb[0][p].max(xb[1][p]);
            if st.rate[p] == 0.0 || umax == 0.0 {
                continue;
            }
            let mean = umax * st.rate[p];
            if mean > self.plan.max_jumps_per_step {
                return Err(SimError::StepOverflow {
                    at: st.t0,
                    expected: mean,
                });
            }
            for _ in 0..poisson(mean, &mut self.shared) {
                let u = self.shared.random::<f64>() * umax;
                let z = self.plan.pick(p, st, &mut self.shared);
                for (c, yc) in y.iter_mut().enumerate() {
                    if u < xb[c][p] {
                        yc[0] += z[0];
                        yc[1] += z[1];
                    }
                }
            }
        }
        for i in 0..2 {
            if st.var[i] == 0.0 {
                continue;
            }
            let bins = [xb[0][i], xb[1][i]].map(|v| (v / self.bin).floor());
            let (lo, hi) = (bins[0].min(bins[1]), bins[0].max(bins[1]));
            let n1: f64 = StandardNormal.sample(&mut self.shared);
            let n2: f64 = StandardNormal.sample(&mut self.shared);
            let b_lo = n1 * (lo * self.bin).sqrt();
            let b_hi = b_lo + n2 * ((hi - lo) * self.bin).sqrt();
            for c in 0..2 {
                let base = if bins[c] == lo { b_lo } else { b_hi };
                let frac = (xb[c][i] - bins[c] * self.bin).max(0.0);
                let own: f64 = StandardNormal.sample(&mut self.own[c]);
                y[c][i] += st.var[i].sqrt() * (base + frac.sqrt() * own);
            }
        }
        Ok(y.map(|s| s.map(|v| v.max(0.0))))
    }

    fn atom(&mut self, a: &AtomPlan, x: [Vec2; 2]) -> [Vec2; 2] {
        let mut y = x.map(|s| [0, 1].map(|i| s[i] * a.keep[i] + s[1 - i] * a.inflow[i]));
        for (p, ch) in a.channels.iter().enumerate() {
            let umax = x[0][p].max(x[1][p]);
            for _ in 0..poisson(umax * ch.mass, &mut self.shared) {
                let u = self.shared.random::<f64>() * umax;
                let z = pick_weighted(&ch.samplers, ch.mass, &mut self.shared).sample(&mut self.shared);
                for (c, yc) in y.iter_mut().enumerate() {
                    if u < x[c][p] {
                        yc[0] += z[0];
                        yc[1] += z[1];
                    }
                }
            }
        }
        y.map(|s| s.map(|v| v.max(0.0)))
    }
}

/// Run two coupled copies from `x0_low <= x0_high` on `[0, t]`.
pub fn coupled_pair(
    env: &EnvSpec,
    x0_low: Vec2,
    x0_high: Vec2,
    t: f64,
    opts: &SimOptions,
    noise: &NoiseStream,
    pair_id: u64,
) -> Result<CoupledPair, SimError> {
    check_state(x0_low)?;
    check_state(x0_high)?;
    if x0_low[0] > x0_high[0] || x0_low[1] > x0_high[1] {
        return Err(SimError::Invalid("need x0_low <= x0_high componentwise".into()));
    }
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
    let mut pair = Pair {
        plan: &plan,
        bin: opts.bin_width,
        shared: noise.substream(tags::COUPLING_SHARED, pair_id),
        own: [
            noise.substream(tags::COUPLING_LOW, pair_id),
            noise.substream(tags::COUPLING_HIGH, pair_id),
        ],
    };
    let mut out = CoupledPair {
        low: Trajectory::default(),
        high: Trajectory::default(),
        order_violations: 0,
    };
    let mut x = [x0_low, x0_high];
    out.low.push(0.0, x[0], x[0], false);
    out.high.push(0.0, x[1], x[1], false);
    for item in &plan.items {
        let (time, left, is_atom) = match item {
            Item::Step(st) => {
                let left = x;
                x = pair.step(st, x)?;
                (st.t1, left, false)
            }
            Item::Atom(a) => {
                let left = x;
                x = pair.atom(a, x);
                (a.time, left, true)
            }
            Item::ZetaAtom(_) | Item::Checkpoint(_) => continue,
        };
        let left = if is_atom { left } else { x };
        out.low.push(time, left[0], x[0], is_atom);
        out.high.push(time, left[1], x[1], is_atom);
        if x[0][0] > x[1][0] || x[0][1] > x[1][1] {
            out.order_violations += 1;
        }
    }
    Ok(out)
}
