use std::fmt;

use super::{ComponentKind, Density, EnvSpec, SignedMeasure, SpatialMeasure};
use crate::other;

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Stable constraint id, e.g. `delta-exceeds-one`.
    pub constraint: &'static str,
    /// Where it happened, e.g. `m_1 atom at t=0.5`.
    pub location: String,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (value {})", self.constraint, self.location, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, constraint: &'static str, location: String, value: f64) {
        self.violations.push(Violation {
            constraint,
            location,
            value,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pass() {
            return write!(f, "PASS");
        }
        writeln!(f, "FAIL: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

pub(super) fn validate(env: &EnvSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let horizon = env.horizon;
    if !(horizon.is_finite() && horizon > 0.0) {
        report.push("invalid-horizon", "horizon".into(), horizon);
        return report;
    }

    for i in 0..2 {
        let j = other(i);
        let ti = i + 1;
        let tj = j + 1;
        check_measure(&mut report, &env.b[i][i], &format!("b_{ti}{ti}"), false, horizon);
        check_measure(&mut report, &env.b[i][j], &format!("b_{ti}{tj}"), true, horizon);
        check_measure(&mut report, &env.c[i], &format!("c_{ti}"), true, horizon);
        if !env.c[i].atoms.is_empty() {
            report.push(
                "diffusion-atom",
                format!("c_{ti} atom at t={}", env.c[i].atoms[0].time),
                env.c[i].atoms[0].mass,
            );
        }

        let kernel = &env.m[i];
        for (k, d) in kernel.density_components.iter().enumerate() {
            let name = format!("m_{ti} density component {}", k + 1);
            check_density(&mut report, &d.rate, &name, true, horizon);
            check_spatial(&mut report, &d.measure, i, &name, false);
        }
        let mut last = f64::NEG_INFINITY;
        for a in &kernel.atoms {
            let name = format!("m_{ti} atom at t={}", a.time);
            check_atom_time(&mut report, a.time, last, &name);
            last = a.time;
            check_spatial(&mut report, &a.measure, i, &name, true);
        }

        for s in env.atom_times(0.0, f64::INFINITY) {
            let d = env.delta(i, s);
            if d > 1.0 {
                report.push("delta-exceeds-one", format!("delta_{ti}(t={s})"), d);
            }
        }
    }
    report
}

fn check_atom_time(report: &mut ValidationReport, time: f64, last: f64, name: &str) {
    if !time.is_finite() || time <= 0.0 {
        report.push("atom-not-positive-time", name.to_string(), time);
    } else if time <= last {
        report.push("atoms-not-increasing", name.to_string(), time);
    }
}

fn check_measure(
    report: &mut ValidationReport,
    m: &SignedMeasure,
    name: &str,
    nonnegative: bool,
    horizon: f64,
) {
    check_density(report, &m.density, name, nonnegative, horizon);
    let mut last = f64::NEG_INFINITY;
    for a in &m.atoms {
        let loc = format!("{name} atom at t={}", a.time);
        check_atom_time(report, a.time, last, &loc);
        last = a.time;
        if !a.mass.is_finite() {
            report.push("non-finite", loc, a.mass);
        } else if nonnegative && a.mass < 0.0 {
            report.push("negative-mass", loc, a.mass);
        }
    }
}

fn check_density(
    report: &mut ValidationReport,
    d: &Density,
    name: &str,
    nonnegative: bool,
    horizon: f64,
) {
    if let Some(problem) = malformed(d) {
        report.push("malformed-density", format!("{name}: {problem}"), f64::NAN);
        return;
    }
    let min = d.min_on(0.0, horizon);
    if !min.is_finite() {
        report.push("non-finite", format!("{name} density"), min);
    } else if nonnegative && min < 0.0 {
        report.push("negative-density", format!("{name} density"), min);
    }
}

fn malformed(d: &Density) -> Option<&'static str> {
    match d {
        Density::Constant(v) => (!v.is_finite()).then_some("non-finite constant"),
        Density::PiecewiseLinear(knots) => {
            if knots.is_empty() {
                Some("no knots")
            } else if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                Some("knot times not increasing")
            } else if knots.iter().flatten().any(|x| !x.is_finite()) {
                Some("non-finite knot")
            } else {
                None
            }
        }
        Density::Table { mesh, values } => {
            if mesh.is_empty() || mesh.len() != values.len() {
                Some("mesh and values must have equal nonzero length")
            } else if mesh.windows(2).any(|w| w[1] <= w[0]) {
                Some("mesh not increasing")
            } else if mesh.iter().chain(values).any(|x| !x.is_finite()) {
                Some("non-finite table entry")
            } else {
                None
            }
        }
        Density::Combination(terms) => terms.iter().find_map(|(k, d)| {
            if k.is_finite() {
                malformed(d)
            } else {
                Some("non-finite scale")
            }
        }),
    }
}

fn check_spatial(
    report: &mut ValidationReport,
    measure: &SpatialMeasure,
    i: usize,
    name: &str,
    finite_mass: bool,
) {
    for (k, c) in measure.components.iter().enumerate() {
        let loc = format!("{name}, spatial component {}", k + 1);
        if !(c.weight.is_finite() && c.weight > 0.0) {
            report.push("nonpositive-weight", loc, c.weight);
            continue;
        }
        let bad_param = match c.kind {
            ComponentKind::Dirac { z } => {
                z.iter().any(|x| !x.is_finite() || *x < 0.0) || z == [0.0, 0.0]
            }
            ComponentKind::ExpProduct { theta, cap } => {
                theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) || cap.is_some_and(|k| k <= 0.0)
            }
            ComponentKind::StableAxis { axis, alpha, cap } => {
                axis > 1 || !(alpha > 1.0 && alpha < 2.0) || cap.is_some_and(|k| k <= 0.0)
            }
        };
        if bad_param {
            let value = match c.kind {
                ComponentKind::StableAxis { alpha, .. } => alpha,
                _ => f64::NAN,
            };
            report.push("unsupported-component-parameter", loc, value);
            continue;
        }
        if let ComponentKind::StableAxis { axis, .. } = c.kind {
            if axis != i {
                report.push("uncompensated-stable", loc, (axis + 1) as f64);
                continue;
            }
            if finite_mass {
                report.push("infinite-atom-mass", loc, f64::INFINITY);
                continue;
            }
        }
        let moment = c.moment_condition(i);
        if !moment.is_finite() {
            report.push("moment-condition", loc, moment);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AtomJump, Component, DensityJump, SignedMeasure};
    use super::*;

    #[test]
    fn empty_environment_passes() {
        assert!(EnvSpec::zero(1.0).validate().pass());
    }

    #[test]
    fn delta_above_one_fails() {
        let mut env = EnvSpec::zero(2.0);
        env.b[0][0] = SignedMeasure::zero().with_atoms(&[(1.0, 1.2)]);
        let report = env.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].constraint, "delta-exceeds-one");
        assert!((report.violations[0].value - 1.2).abs() < 1e-15);
    }

    #[test]
    fn delta_equal_one_is_allowed() {
        let mut env = EnvSpec::zero(2.0);
        env.b[0][0] = SignedMeasure::zero().with_atoms(&[(1.0, 1.0)]);
        assert!(env.validate().pass());
    }

    #[test]
    fn stable_alpha_out_of_range_is_rejected() {
        let mut env = EnvSpec::zero(1.0);
        env.m[0].density_components.push(DensityJump {
            rate: Density::Constant(1.0),
            measure: SpatialMeasure::single(Component::stable_axis(1.0, 0, 0.8)),
        });
        let report = env.validate();
        assert_eq!(report.violations[0].constraint, "unsupported-component-parameter");
    }

    #[test]
    fn stable_off_axis_and_in_atoms_are_rejected() {
        let mut env = EnvSpec::zero(1.0);
        env.m[0].density_components.push(DensityJump {
            rate: Density::Constant(1.0),
            measure: SpatialMeasure::single(Component::stable_axis(1.0, 1, 1.5)),
        });
        env.m[1].atoms.push(AtomJump {
            time: 0.5,
            measure: SpatialMeasure::single(Component::stable_axis(1.0, 1, 1.5)),
        });
        let ids: Vec<_> = env.validate().violations.iter().map(|v| v.constraint).collect();
        assert_eq!(
            ids,
            vec!["uncompensated-stable", "infinite-atom-mass", "delta-exceeds-one"]
        );
    }

    #[test]
    fn negative_cross_rate_and_diffusion_atom_fail() {
        let mut env = EnvSpec::zero(1.0);
        env.b[0][1] = SignedMeasure::constant(-0.1);
        env.c[1] = SignedMeasure::zero().with_atoms(&[(0.5, 0.2)]);
        let ids: Vec<_> = env.validate().violations.iter().map(|v| v.constraint).collect();
        assert!(ids.contains(&"negative-density"));
        assert!(ids.contains(&"diffusion-atom"));
    }
}
