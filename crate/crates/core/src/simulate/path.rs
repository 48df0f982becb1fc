use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};

use super::plan::{apply, Item, SimPlan};
use super::SimError;
use crate::{dot, Vec2};

/// Hooks called while a path runs.
pub(crate) trait Observer {
    fn step(&mut self, _t: f64, _x: Vec2) {}
    fn atom(&mut self, _t: f64, _left: Vec2, _x: Vec2) {}
    fn checkpoint(&mut self, _k: usize, _x: Vec2) {}
}

pub(crate) struct Silent;

impl Observer for Silent {}

/// Final state and accumulated `Σ_i ∫ X_i ζ_i(ds)`.
pub(crate) struct PathEnd {
    pub x: Vec2,
    pub functional: f64,
}

/// Below this ratio `y² / v` the Gaussian increment is replaced.
const GAUSS_MIN_SHAPE: f64 = 100.0;

/// Add a centred increment of variance `v` to `y >= 0`. Near zero this is
/// the driftless Feller step `Gamma(Poisson(y / C), C)`, `C = v / (2y)`,
/// which has the same mean and variance, stays nonnegative and puts mass
/// `exp(-y / C)` on zero.
#[inline]
pub(crate) fn diffuse<R: Rng + ?Sized>(y: f64, v: f64, rng: &mut R) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let shape = y * y / v;
    if shape >= GAUSS_MIN_SHAPE {
        let n: f64 = StandardNormal.sample(rng);
        return y + v.sqrt() * n;
    }
    let scale = v / (2.0 * y);
    let n = Poisson::new(2.0 * shape).expect("positive mean").sample(rng);
    if n == 0.0 {
        return 0.0;
    }
    Gamma::new(n, scale).expect("positive shape").sample(rng)
}

pub(crate) fn run<R: Rng, O: Observer>(
    plan: &SimPlan,
    x0: Vec2,
    rng: &mut R,
    obs: &mut O,
) -> Result<PathEnd, SimError> {
    let mut x = x0;
    let mut functional = 0.0;
    // exponential clocks of the two jump channels
    let mut clock = [0.0f64; 2];
    for p in 0..2 {
        if plan.has_jumps[p] {
            clock[p] = Exp1.sample(rng);
        }
    }

    for item in &plan.items {
        match item {
            Item::Step(st) => {
                if x == [0.0, 0.0] {
                    obs.step(st.t1, x);
                    continue;
                }
                let mean_x = apply(&st.dwell, x);
                let mut jumps = [0.0; 2];
                for p in 0..2 {
                    if st.rate[p] == 0.0 || mean_x[p] == 0.0 {
                        continue;
                    }
                    let mut need = mean_x[p] * st.rate[p];
                    if need > plan.max_jumps_per_step {
                        return Err(SimError::StepOverflow {
                            at: st.t0,
                            expected: need,
                        });
                    }
                    while clock[p] <= need {
                        need -= clock[p];
                        clock[p] = Exp1.sample(rng);
                        let z = plan.pick(p, st, rng);
                        jumps[0] += z[0];
                        jumps[1] += z[1];
                    }
                    clock[p] -= need;
                }
                let start = x;
                let mut y = apply(&st.prop, start);
                for i in 0..2 {
                    if st.var[i] > 0.0 && mean_x[i] > 0.0 {
                        y[i] = diffuse(y[i], st.var[i] * mean_x[i], rng);
                    }
                    y[i] = (y[i] + jumps[i]).max(0.0);
                }
                if let Some(z) = &st.zeta {
                    functional += 0.5 * (st.t1 - st.t0) * (dot(z[0], start) + dot(z[1], y));
                }
                x = y;
                obs.step(st.t1, x);
            }
            Item::Atom(a) => {
                let left = x;
                x = a.apply(x, rng);
                obs.atom(a.time, left, x);
            }
            Item::ZetaAtom(mass) => functional += dot(*mass, x),
            Item::Checkpoint(k) => obs.checkpoint(*k, x),
        }
    }
    Ok(PathEnd { x, functional })
}
