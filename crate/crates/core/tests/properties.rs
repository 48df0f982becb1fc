use proptest::prelude::*;

use tcbve::cumulant::{semigroup_check, solve_backward, solve_backward_on};
use tcbve::environment::{Component, DensityJump, SpatialMeasure};
use tcbve::functionals::solve_functional;
use tcbve::moments::{first_moment, moment_bound};
use tcbve::simulate::truncate_large_jumps;
use tcbve::verify::random_env;
use tcbve::{EnvSpec, SignedMeasure, SolverOptions, WeightMeasure};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn le(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    (0..2).all(|i| a[i] <= b[i] + tol * (1.0 + b[i].abs()))
}

fn without_noise(mut env: EnvSpec) -> EnvSpec {
    env.c = Default::default();
    env.m = Default::default();
    env
}

#[test]
fn moment_bound_dominates_on_random_envs() {
    for seed in 0..100 {
        let env = random_env(seed);
        assert!(env.validate().pass());
        let x0 = [1.0 + (seed % 3) as f64, 0.5 * (seed % 4) as f64];
        let curve = first_moment(&env, x0, 1.0).unwrap();
        for (&t, m) in curve.times.iter().zip(&curve.values) {
            let bound = moment_bound(&env, x0, t);
            assert!(le(*m, bound, 1e-9), "seed {seed}, t={t}: {m:?} > {bound:?}");
        }
    }
}

#[test]
fn semigroup_holds_on_random_envs() {
    for seed in 100..130 {
        let env = random_env(seed);
        for (r, s) in [(0.0, 0.5), (0.2, 0.9), (0.35, 0.35)] {
            let res = semigroup_check(&env, r, s, 1.0, [1.0, 2.0], &opts()).unwrap();
            assert!(res[0] < 1e-6 && res[1] < 1e-6, "seed {seed}: {res:?}");
        }
    }
}

#[test]
fn deterministic_duality_with_first_moment() {
    for seed in 200..240 {
        let env = without_noise(random_env(seed));
        let x0 = [1.5, 0.7];
        let lambda = [0.8, 1.9];
        let m = first_moment(&env, x0, 1.0).unwrap().terminal();
        let v = solve_backward(&env, 1.0, lambda, &opts()).unwrap().value();
        let lhs = lambda[0] * m[0] + lambda[1] * m[1];
        let rhs = x0[0] * v[0] + x0[1] * v[1];
        assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()), "seed {seed}: {lhs} vs {rhs}");
    }
}

#[test]
fn truncation_is_monotone_on_random_envs() {
    for seed in 300..320 {
        let env = random_env(seed);
        let mut prev = [0.0; 2];
        for (n, k) in [0.25, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            let v = solve_backward(&truncate_large_jumps(&env, k), 1.0, [1.0, 1.0], &opts())
                .unwrap()
                .value();
            if n > 0 {
                assert!(le(prev, v, 1e-8), "seed {seed}, k={k}: {prev:?} > {v:?}");
            }
            prev = v;
        }
    }
}

fn decoupled(b: [f64; 2], c: [f64; 2], w: f64, theta: f64) -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    for i in 0..2 {
        env.b[i][i] = SignedMeasure::constant(b[i]);
        env.c[i] = SignedMeasure::constant(c[i]);
    }
    env.m[0].density_components.push(DensityJump {
        rate: tcbve::Density::Constant(1.0),
        measure: SpatialMeasure::single(Component::dirac(w, [1.0 / theta, 0.0])),
    });
    env
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn monotone_in_lambda(seed in 0u64..10_000, l1 in 0.0..4.0f64, l2 in 0.0..4.0f64,
                          d1 in 0.0..2.0f64, d2 in 0.0..2.0f64) {
        let env = random_env(seed);
        let lo = solve_backward(&env, 1.0, [l1, l2], &opts()).unwrap();
        let hi = solve_backward(&env, 1.0, [l1 + d1, l2 + d2], &opts()).unwrap();
        for r in [0.0, 0.3, 0.6] {
            prop_assert!(le(lo.value_at(r).unwrap(), hi.value_at(r).unwrap(), 1e-8));
        }
    }

    #[test]
    fn cumulant_is_nonnegative(seed in 0u64..10_000, l1 in 0.0..5.0f64, l2 in 0.0..5.0f64) {
        let env = random_env(seed);
        let v = solve_backward(&env, 1.0, [l1, l2], &opts()).unwrap().value();
        prop_assert!(v[0] >= 0.0 && v[1] >= 0.0);
    }

    #[test]
    fn decoupled_types_evolve_separately(b1 in -0.5..1.5f64, b2 in -0.5..1.5f64,
                                         c1 in 0.0..1.0f64, c2 in 0.0..1.0f64,
                                         w in 0.0..1.0f64, theta in 1.0..4.0f64,
                                         l1 in 0.0..3.0f64, l2 in 0.0..3.0f64) {
        let env = decoupled([b1, b2], [c1, c2], w, theta);
        prop_assume!(env.validate().pass());
        let both = solve_backward(&env, 1.0, [l1, l2], &opts()).unwrap().value();
        let first = solve_backward(&env, 1.0, [l1, 0.0], &opts()).unwrap().value();
        let second = solve_backward(&env, 1.0, [0.0, l2], &opts()).unwrap().value();
        prop_assert!((both[0] - first[0]).abs() < 1e-9 * (1.0 + first[0]));
        prop_assert!((both[1] - second[1]).abs() < 1e-9 * (1.0 + second[1]));
        prop_assert_eq!(first[1], 0.0);
        prop_assert_eq!(second[0], 0.0);
    }

    #[test]
    fn monotone_in_zeta(seed in 0u64..10_000, a in 0.0..1.0f64, da in 0.0..1.0f64,
                        m in 0.0..1.0f64, dm in 0.0..1.0f64, s in 0.1..0.9f64) {
        let env = random_env(seed);
        let mut small = WeightMeasure::zero();
        small.zeta[0] = SignedMeasure::constant(a).with_atoms(&[(s, m)]);
        small.zeta[1] = SignedMeasure::constant(0.5 * a);
        let mut large = WeightMeasure::zero();
        large.zeta[0] = SignedMeasure::constant(a + da).with_atoms(&[(s, m + dm)]);
        large.zeta[1] = SignedMeasure::constant(0.5 * a + da);
        let u = solve_functional(&env, &small, 0.0, 1.0, [0.5, 0.5], &opts()).unwrap();
        let u2 = solve_functional(&env, &large, 0.0, 1.0, [0.5, 0.5], &opts()).unwrap();
        prop_assert!(le(u.u(), u2.u(), 1e-8));
    }

    #[test]
    fn zero_zeta_reduces_to_cumulant(seed in 0u64..10_000, l1 in 0.0..3.0f64, l2 in 0.0..3.0f64,
                                     r in 0.0..0.9f64) {
        let env = random_env(seed);
        let f = solve_functional(&env, &WeightMeasure::zero(), r, 1.0, [l1, l2], &opts()).unwrap();
        let v = solve_backward_on(&env, r, 1.0, [l1, l2], &opts()).unwrap();
        prop_assert_eq!(f.u(), v.value());
    }
}
