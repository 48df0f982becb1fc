use crate::environment::{Density, EnvSpec};

/// Cap every jump coordinate at `k` and move the lost own-coordinate mass
/// `∫ (z_i - k)^+ m_i` into the diagonal drift `b_ii` as killing.
pub fn truncate_large_jumps(env: &EnvSpec, k: f64) -> EnvSpec {
    assert!(k > 0.0, "truncation level must be positive");
    let mut out = env.clone();
    for i in 0..2 {
        let mut kill: Vec<(f64, Density)> = Vec::new();
        for d in &mut out.m[i].density_components {
            let excess = d.measure.excess_mean(i, k);
            if excess > 0.0 {
                kill.push((excess, d.rate.clone()));
            }
            d.measure = d.measure.capped(k);
        }
        let mut atom_kill: Vec<(f64, f64)> = Vec::new();
        for a in &mut out.m[i].atoms {
            let excess = a.measure.excess_mean(i, k);
            if excess > 0.0 {
                atom_kill.push((a.time, excess));
            }
            a.measure = a.measure.capped(k);
        }
        let diag = &mut out.b[i][i];
        if !kill.is_empty() {
            let mut terms = vec![(1.0, diag.density.clone())];
            terms.extend(kill);
            diag.density = Density::Combination(terms);
        }
        for (time, mass) in atom_kill {
            match diag.atoms.iter_mut().find(|a| a.time == time) {
                Some(a) => a.mass += mass,
                None => diag.atoms.push(crate::environment::Atom { time, mass }),
            }
        }
        diag.atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Component, ComponentKind, DensityJump, SpatialMeasure};

    fn dirac_env(z: [f64; 2]) -> EnvSpec {
        let mut env = EnvSpec::zero(1.0);
        env.m[0].density_components.push(DensityJump {
            rate: Density::Constant(1.0),
            measure: SpatialMeasure::single(Component::dirac(1.0, z)),
        });
        env
    }

    #[test]
    fn small_dirac_jumps_are_untouched() {
        let env = dirac_env([1.0, 0.5]);
        assert_eq!(truncate_large_jumps(&env, 2.0), env);
    }

    #[test]
    fn large_dirac_jump_is_capped_with_killing() {
        let out = truncate_large_jumps(&dirac_env([3.0, 0.0]), 2.0);
        assert_eq!(
            out.m[0].density_components[0].measure.components[0].kind,
            ComponentKind::Dirac { z: [2.0, 0.0] }
        );
        assert_eq!(out.b[0][0].density.eval(0.3), 1.0);
        assert_eq!(out.delta(0, 0.3), 0.0);
    }
}
