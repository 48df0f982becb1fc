//! Time densities: piecewise-linear rate functions `s -> rate`.
//!
//! Every density is linear between its breakpoints, so integrals, total
//! variation and sign checks are exact. Solvers and the simulator split
//! their time axis at [`Density::breakpoints`] and work with one
//! [`Linear`] piece per segment.

/// A single linear piece `value + slope * (s - origin)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Linear {
    pub origin: f64,
    pub value: f64,
    pub slope: f64,
}

impl Linear {
    pub const ZERO: Linear = Linear {
        origin: 0.0,
        value: 0.0,
        slope: 0.0,
    };

    pub fn constant(value: f64) -> Self {
        Linear {
            origin: 0.0,
            value,
            slope: 0.0,
        }
    }

    #[inline]
    pub fn at(&self, s: f64) -> f64 {
        self.value + self.slope * (s - self.origin)
    }

    /// Exact integral over `[a, b]`.
    #[inline]
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        0.5 * (self.at(a) + self.at(b)) * (b - a)
    }

    /// Exact integral of `|f|` over `[a, b]`, `a <= b`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        let (fa, fb) = (self.at(a), self.at(b));
        if fa * fb >= 0.0 {
            return (0.5 * (fa + fb) * (b - a)).abs();
        }
        // one sign change at the root
        let root = a + (b - a) * fa / (fa - fb);
        0.5 * (fa.abs() * (root - a) + fb.abs() * (b - root))
    }

    /// `self + k * other`, re-expressed about `self.origin`.
    pub fn add_scaled(&self, k: f64, other: &Linear) -> Linear {
        Linear {
            origin: self.origin,
            value: self.value + k * other.at(self.origin),
            slope: self.slope + k * other.slope,
        }
    }

    pub fn scaled(&self, k: f64) -> Linear {
        Linear {
            origin: self.origin,
            value: k * self.value,
            slope: k * self.slope,
        }
    }
}

/// A rate function of time.
///
/// `PiecewiseLinear` interpolates its knots and is held constant outside
/// them; `Table` is right-continuous piecewise constant, `values[k]` on
/// `[mesh[k], mesh[k+1])`, with `values[0]` before the mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant(f64),
    PiecewiseLinear(Vec<[f64; 2]>),
    Table { mesh: Vec<f64>, values: Vec<f64> },
    /// `sum_k scale_k * density_k`
    Combination(Vec<(f64, Density)>),
}

impl Default for Density {
    fn default() -> Self {
        Density::Constant(0.0)
    }
}

impl Density {
    pub fn zero() -> Self {
        Density::Constant(0.0)
    }

    /// True when the density is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            Density::Constant(v) => *v == 0.0,
            Density::PiecewiseLinear(knots) => knots.iter().all(|k| k[1] == 0.0),
            Density::Table { values, .. } => values.iter().all(|v| *v == 0.0),
            Density::Combination(terms) => terms.iter().all(|(k, d)| *k == 0.0 || d.is_zero()),
        }
    }

    /// Sorted, deduplicated times where the density may have a kink or jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Density::Constant(_) => {}
            Density::PiecewiseLinear(knots) => out.extend(knots.iter().map(|k| k[0])),
            Density::Table { mesh, .. } => out.extend(mesh.iter().copied()),
            Density::Combination(terms) => {
                for (_, d) in terms {
                    d.collect_breakpoints(out);
                }
            }
        }
    }

    /// Right-continuous point evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Density::Constant(v) => *v,
            Density::PiecewiseLinear(knots) => {
                let n = knots.len();
                if n == 0 {
                    return 0.0;
                }
                if s <= knots[0][0] {
                    return knots[0][1];
                }
                if s >= knots[n - 1][0] {
                    return knots[n - 1][1];
                }
                let k = knots.partition_point(|p| p[0] <= s) - 1;
                let [x0, y0] = knots[k];
                let [x1, y1] = knots[k + 1];
                y0 + (y1 - y0) * (s - x0) / (x1 - x0)
            }
            Density::Table { mesh, values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let k = mesh.partition_point(|m| *m <= s);
                values[k.saturating_sub(1).min(values.len() - 1)]
            }
            Density::Combination(terms) => terms.iter().map(|(k, d)| k * d.eval(s)).sum(),
        }
    }

    /// The linear piece in force on the open interval `(lo, hi)`, which
    /// must not contain a breakpoint. The result is anchored at `lo`.
    pub fn piece_on(&self, lo: f64, hi: f64) -> Linear {
        let mid = 0.5 * (lo + hi);
        match self {
            Density::Constant(v) => Linear {
                origin: lo,
                value: *v,
                slope: 0.0,
            },
            Density::PiecewiseLinear(knots) => {
                let n = knots.len();
                if n < 2 || mid <= knots[0][0] || mid >= knots[n - 1][0] {
                    return Linear {
                        origin: lo,
                        value: self.eval(mid),
                        slope: 0.0,
                    };
                }
                let k = knots.partition_point(|p| p[0] <= mid) - 1;
                let [x0, y0] = knots[k];
                let [x1, y1] = knots[k + 1];
                let slope = (y1 - y0) / (x1 - x0);
                Linear {
                    origin: lo,
                    value: y0 + slope * (lo - x0),
                    slope,
                }
            }
            Density::Table { .. } => Linear {
                origin: lo,
                value: self.eval(mid),
                slope: 0.0,
            },
            Density::Combination(terms) => terms.iter().fold(
                Linear {
                    origin: lo,
                    value: 0.0,
                    slope: 0.0,
                },
                |acc, (k, d)| acc.add_scaled(*k, &d.piece_on(lo, hi)),
            ),
        }
    }

    /// Sub-intervals of `[a, b]` split at breakpoints, `a <= b`.
    pub fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        split_at(a, b, &self.breakpoints())
    }

    /// Exact `∫_a^b f(s) ds` (signed, `a > b` allowed).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integral(b, a);
        }
        if let Density::Constant(v) = self {
            return v * (b - a);
        }
        self.segments(a, b)
            .into_iter()
            .map(|(lo, hi)| self.piece_on(lo, hi).integral(lo, hi))
            .sum()
    }

    /// Exact `∫_a^b |f(s)| ds`, `a <= b`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        self.segments(a, b)
            .into_iter()
            .map(|(lo, hi)| self.piece_on(lo, hi).abs_integral(lo, hi))
            .sum()
    }

    /// Infimum over `[a, b]` (attained at a segment end since pieces are linear).
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return self.eval(a);
        }
        self.segments(a, b)
            .into_iter()
            .flat_map(|(lo, hi)| {
                let p = self.piece_on(lo, hi);
                [p.at(lo), p.at(hi)]
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Split `[a, b]` at the given sorted points strictly inside it.
pub(crate) fn split_at(a: f64, b: f64, points: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut lo = a;
    for &p in points {
        if p > lo && p < b {
            out.push((lo, p));
            lo = p;
        }
    }
    if b > lo || out.is_empty() {
        out.push((lo, b));
    }
    out
}
