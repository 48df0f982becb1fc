//! Numerical results checked against closed forms and independent
//! quadrature or integration.

use tcbve::cumulant::{extinction_prob, solve_backward, solve_backward_on};
use tcbve::environment::{AtomJump, Component, Density, SpatialMeasure};
use tcbve::functionals::{mc_functional, solve_w};
use tcbve::moments::first_moment;
use tcbve::simulate::{simulate_atom, simulate_path, tags};
use tcbve::{EnvSpec, NoiseStream, SignedMeasure, SimOptions, SolverOptions, WeightMeasure};

fn feller(b: f64, c: f64) -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0] = SignedMeasure::constant(b);
    env.c[0] = SignedMeasure::constant(c);
    env
}

/// Classical RK4 with a fixed step for `dv/dr = b v + c v^2`, run from
/// `r = t` down to `r = 0`.
fn riccati_rk4(b: f64, c: f64, lambda: f64, t: f64, n: usize) -> f64 {
    let f = |v: f64| b * v + c * v * v;
    let h = t / n as f64;
    let mut v = lambda;
    for _ in 0..n {
        let k1 = f(v);
        let k2 = f(v - 0.5 * h * k1);
        let k3 = f(v - 0.5 * h * k2);
        let k4 = f(v - h * k3);
        v -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `exp(M τ) λ` by a long Taylor series with scaling and squaring.
fn expm_apply(m: [[f64; 2]; 2], tau: f64, lambda: [f64; 2]) -> [f64; 2] {
    let squarings = 10;
    let scale = tau / f64::from(1 << squarings);
    let a = [[m[0][0] * scale, m[0][1] * scale], [m[1][0] * scale, m[1][1] * scale]];
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        [[0, 1].map(|j| x[0][0] * y[0][j] + x[0][1] * y[1][j]),
         [0, 1].map(|j| x[1][0] * y[0][j] + x[1][1] * y[1][j])]
    };
    let mut e = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = e;
    for k in 1..30 {
        term = mul(term, a);
        term = term.map(|row| row.map(|v| v / k as f64));
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        e = mul(e, e);
    }
    [0, 1].map(|i| e[i][0] * lambda[0] + e[i][1] * lambda[1])
}

#[test]
fn feller_cumulant_matches_closed_form_and_rk4() {
    let (b, c, lambda, t) = (1.0f64, 0.5f64, 2.0f64, 1.0f64);
    let closed = lambda * (-b * t).exp() / (1.0 + c * lambda / b * (1.0 - (-b * t).exp()));
    let rk4 = riccati_rk4(b, c, lambda, t, 1_000_000);
    assert!((closed - rk4).abs() < 1e-12 * closed);

    let v = solve_backward(&feller(b, c), t, [lambda, 0.0], &SolverOptions::default())
        .unwrap()
        .value();
    assert!((v[0] - closed).abs() < 1e-6 * closed, "{} vs {closed}", v[0]);
    assert_eq!(v[1], 0.0);
}

#[test]
fn feller_cumulant_along_the_interval() {
    let sol = solve_backward(&feller(1.0, 0.5), 1.0, [2.0, 0.0], &SolverOptions::default()).unwrap();
    for k in 0..=10 {
        let r = k as f64 / 10.0;
        let want = riccati_rk4(1.0, 0.5, 2.0, 1.0 - r, 100_000);
        let got = sol.value_at(r).unwrap()[0];
        assert!((got - want).abs() < 1e-8, "r={r}: {got} vs {want}");
    }
}

#[test]
fn feller_extinction_probability() {
    let limit = 1.0 / (0.5 * (1f64.exp() - 1.0));
    // w = 1/v solves dw/dr = -w - 0.5, started from w(1) = 0
    let mut w = 0.0;
    let h = 1e-5;
    for _ in 0..100_000 {
        let f = |w: f64| -w - 0.5;
        let k1 = f(w);
        let k2 = f(w - 0.5 * h * k1);
        let k3 = f(w - 0.5 * h * k2);
        let k4 = f(w - h * k3);
        w -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    assert!((1.0 / w - limit).abs() < 1e-10);
    let p = extinction_prob(&feller(1.0, 0.5), [1.0, 0.0], 1.0, &SolverOptions::default()).unwrap();
    assert!((p - (-limit).exp()).abs() < 1e-8);
}

#[test]
fn linear_two_type_matches_matrix_exponential() {
    let (b11, b12, b21, b22) = (1.0, 0.3, 0.2, 0.5);
    let mut env = EnvSpec::zero(2.0);
    env.b[0][0] = SignedMeasure::constant(b11);
    env.b[0][1] = SignedMeasure::constant(b12);
    env.b[1][0] = SignedMeasure::constant(b21);
    env.b[1][1] = SignedMeasure::constant(b22);
    let lambda = [1.0, 2.0];
    let sol = solve_backward_on(&env, 0.0, 2.0, lambda, &SolverOptions::default()).unwrap();
    let m = [[-b11, b12], [b21, -b22]];
    for r in [0.0, 0.5, 1.3] {
        let want = expm_apply(m, 2.0 - r, lambda);
        let got = sol.value_at(r).unwrap();
        for i in 0..2 {
            assert!((got[i] - want[i]).abs() < 1e-9, "r={r}: {got:?} vs {want:?}");
        }
    }
    // forward moments are the transpose flow
    let mt = [[-b11, b21], [b12, -b22]];
    let x0 = [1.0, 2.0];
    let mom = first_moment(&env, x0, 2.0).unwrap().terminal();
    let want = expm_apply(mt, 2.0, x0);
    for i in 0..2 {
        assert!((mom[i] - want[i]).abs() < 1e-9);
    }
}

#[test]
fn time_varying_decay_matches_quadrature() {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0].density = Density::PiecewiseLinear(vec![[0.0, 1.0], [0.4, 2.0], [1.0, 0.5]]);
    let b = |s: f64| {
        if s < 0.4 {
            1.0 + 2.5 * s
        } else {
            2.0 - 2.5 * (s - 0.4)
        }
    };
    let sol = solve_backward(&env, 1.0, [3.0, 0.0], &SolverOptions::default()).unwrap();
    for r in [0.0, 0.2, 0.4, 0.7] {
        let integral = simpson(b, r, 0.4f64.max(r), 2000) + simpson(b, 0.4f64.max(r), 1.0, 2000);
        let want = 3.0 * (-integral).exp();
        let got = sol.value_at(r).unwrap()[0];
        assert!((got - want).abs() < 1e-9, "r={r}: {got} vs {want}");
    }
}

#[test]
fn stable_kernel_matches_quadrature() {
    let (alpha, lambda) = (1.5f64, 4.0f64);
    let c = Component::stable_axis(1.0, 0, alpha);
    let got = c.k_integral(0, [lambda, 0.0]).unwrap();
    // z = e^u; closed-form tails below e^{lo} and above e^{hi}
    let (lo, hi) = (-40.0f64, 12.0f64);
    let body = simpson(
        |u: f64| {
            let z = u.exp();
            ((-(lambda * z)).exp_m1() + lambda * z) * (-alpha * u).exp()
        },
        lo,
        hi,
        400_000,
    );
    let z_lo = lo.exp();
    let z_hi = hi.exp();
    let low_tail = lambda * lambda / 2.0 * z_lo.powf(2.0 - alpha) / (2.0 - alpha);
    let high_tail = lambda * z_hi.powf(1.0 - alpha) / (alpha - 1.0) - z_hi.powf(-alpha) / alpha;
    let want = body + low_tail + high_tail;
    assert!((got - want).abs() < 1e-7 * want, "{got} vs {want}");
    let closed = std::f64::consts::PI.sqrt() / 0.75 * 8.0;
    assert!((got - closed).abs() < 1e-10 * closed);
}

#[test]
fn exponential_mean_matches_quadrature() {
    let c = Component::exp_product(1.0, [2.0, 1.0]);
    let numeric = simpson(|z| z * 2.0 * (-2.0 * z).exp(), 0.0, 40.0, 20_000);
    assert!((c.mean(0) - numeric).abs() < 1e-10);
    assert!((c.mean(0) - 0.5).abs() < 1e-15);
}

fn deterministic_env() -> EnvSpec {
    let mut env = EnvSpec::zero(1.0);
    env.b[0][0].density = Density::PiecewiseLinear(vec![[0.0, 0.5], [1.0, 1.5]]);
    env.b[1][0] = SignedMeasure::constant(0.4);
    env.b[0][1] = SignedMeasure::constant(0.2);
    env.b[1][1] = SignedMeasure::constant(-0.3);
    env
}

#[test]
fn deterministic_path_follows_first_moment() {
    let env = deterministic_env();
    assert!(env.validate().pass());
    let h = 1e-4;
    let opts = SimOptions {
        step: h,
        ..SimOptions::default()
    };
    let path = simulate_path(&env, [1.0, 2.0], 1.0, &opts, &NoiseStream::new(5), 0).unwrap();
    let curve = first_moment(&env, [1.0, 2.0], 1.0).unwrap();
    for p in path.points.iter().step_by(500) {
        let m = curve.value_at(p.t).unwrap();
        for i in 0..2 {
            assert!((p.x[i] - m[i]).abs() < 5.0 * h, "t={}: {:?} vs {m:?}", p.t, p.x);
        }
    }
    let end = path.terminal();
    let m = curve.terminal();
    assert!((end[0] - m[0]).abs() < 5.0 * h && (end[1] - m[1]).abs() < 5.0 * h);
}

#[test]
fn deterministic_functional_is_exact() {
    let env = deterministic_env();
    let mut zeta = WeightMeasure::zero();
    zeta.zeta[0] = SignedMeasure::constant(1.0).with_atoms(&[(0.5, 0.7)]);
    zeta.zeta[1] = SignedMeasure::constant(0.25);
    let x0 = [1.0, 2.0];
    let curve = first_moment(&env, x0, 1.0).unwrap();
    let x = |s: f64| curve.value_at(s).unwrap();
    let integral = simpson(|s| x(s)[0] + 0.25 * x(s)[1], 0.0, 1.0, 2000) + 0.7 * x(0.5)[0];
    let want = (-integral).exp();

    let w = solve_w(&env, &zeta, 0.0, 1.0, &SolverOptions::default()).unwrap();
    let analytic = (-(x0[0] * w[0] + x0[1] * w[1])).exp();
    assert!((analytic - want).abs() < 1e-9, "{analytic} vs {want}");

    let opts = SimOptions {
        step: 1e-4,
        ..SimOptions::default()
    };
    let est = mc_functional(&env, x0, &zeta, 0.0, 1.0, 16, &opts, &NoiseStream::new(2)).unwrap();
    assert!(est.se < 1e-12);
    assert!((est.mean - want).abs() < 1e-4, "{} vs {want}", est.mean);
}

#[test]
fn compensated_atom_preserves_the_mean() {
    let mut env = EnvSpec::zero(1.0);
    env.m[0].atoms.push(AtomJump {
        time: 0.5,
        measure: SpatialMeasure::single(Component::dirac(0.4, [1.0, 0.0])),
    });
    assert!((env.delta(0, 0.5) - 0.4).abs() < 1e-15);
    let mut rng = NoiseStream::new(11).substream(tags::PATH, 0);
    let n = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let x = simulate_atom(&env, 0.5, [2.0, 0.0], &mut rng).unwrap();
        assert_eq!(x[1], 0.0);
        let jumps = x[0] - 1.2;
        assert!((jumps - jumps.round()).abs() < 1e-12 && jumps >= -1e-12);
        sum += x[0];
        sq += x[0] * x[0];
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    let se = (var / n as f64).sqrt();
    assert!((mean - 2.0).abs() < 4.0 * se, "mean {mean}, se {se}");
    // Poisson(0.8) variance
    assert!((var - 0.8).abs() < 0.01, "variance {var}");
}
