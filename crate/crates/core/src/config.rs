//! File schema for environments, weight measures and run parameters.
//!
//! ```toml
//! horizon = 1.0
//!
//! [[types]]
//! b_diag = { density = { constant = 1.0 }, atoms = [{ t = 0.5, mass = 0.2 }] }
//! c = { density = { constant = 0.5 } }
//! m.density_components = [
//!     { rate = { constant = 1.0 }, measure = { kind = "dirac", params = [1.0, 0.5], weight = 0.3 } },
//! ]
//!
//! [[types]]
//! b_cross = { density = { table = { mesh = [0.0, 0.5], values = [1.0, 2.0] } } }
//! ```
//!
//! `b_cross` of type `i` is `b_ij`. Stable components use 1-based axes:
//! `{ kind = "stable_axis", params = [1, 1.5], weight = 0.3 }`. Files
//! ending in `.json` are read as JSON, everything else as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{
    Atom, AtomJump, Component, ComponentKind, Density, DensityJump, EnvSpec, JumpKernel,
    SignedMeasure, SpatialMeasure,
};
use crate::functionals::WeightMeasure;
use crate::simulate::SmallJumpMode;
use crate::verify::Gates;
use crate::Vec2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot serialize: {0}")]
    Serialize(String),
    #[error("invalid config: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Constant(f64),
    PiecewiseLinear(Vec<[f64; 2]>),
    Table { mesh: Vec<f64>, values: Vec<f64> },
    Combination(Vec<ScaledDensity>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledDensity {
    pub scale: f64,
    pub density: DensityConfig,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig::Constant(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub t: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub density: DensityConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    Dirac,
    ExpProduct,
    StableAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub kind: ComponentTag,
    pub params: Vec<f64>,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

/// A single component or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpatialConfig {
    One(ComponentConfig),
    Many(Vec<ComponentConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityJumpConfig {
    pub rate: DensityConfig,
    pub measure: SpatialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJumpConfig {
    pub t: f64,
    pub measure: SpatialConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub density_components: Vec<DensityJumpConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomJumpConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypeConfig {
    pub b_diag: MeasureConfig,
    pub b_cross: MeasureConfig,
    pub c: MeasureConfig,
    pub m: KernelConfig,
}

/// Optional run parameters; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<Vec2>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_jumps: Option<SmallJumpMode>,
}

/// Gates and optional checks for `verify --scenario`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub gates: Gates,
    /// Larger start for the comparison gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_high: Option<Vec2>,
    /// Coupled pairs for the diffusion-free comparison gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub truncation: Vec<f64>,
    /// Coarse and fine step for the extinction refinement gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub horizon: f64,
    pub types: Vec<TypeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<MeasureConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
}

/// A parsed file: environment plus optional weight measure, run data and
/// verification settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub env: EnvSpec,
    pub zeta: Option<WeightMeasure>,
    pub run: RunSection,
    pub verify: Option<VerifySection>,
}

pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if is_json(path) {
        from_json(&text)
    } else {
        from_toml(&text)
    }
}

pub fn from_toml(text: &str) -> Result<LoadedConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    file.into_loaded()
}

pub fn from_json(text: &str) -> Result<LoadedConfig, ConfigError> {
    let file: ConfigFile = serde_json::from_str(text)?;
    file.into_loaded()
}

/// Serialize in the format implied by `path`'s extension.
pub fn render_for(path: &Path, file: &ConfigFile) -> Result<String, ConfigError> {
    if is_json(path) {
        serde_json::to_string_pretty(file).map_err(|e| ConfigError::Serialize(e.to_string()))
    } else {
        file.to_toml()
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

impl ConfigFile {
    pub fn from_parts(env: &EnvSpec, zeta: Option<&WeightMeasure>, run: Option<RunSection>) -> Self {
        let types = (0..2)
            .map(|i| TypeConfig {
                b_diag: measure_to_config(&env.b[i][i]),
                b_cross: measure_to_config(&env.b[i][1 - i]),
                c: measure_to_config(&env.c[i]),
                m: kernel_to_config(&env.m[i]),
            })
            .collect();
        ConfigFile {
            horizon: env.horizon,
            types,
            zeta: zeta.map(|z| z.zeta.iter().map(measure_to_config).collect()),
            run,
            verify: None,
        }
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn into_loaded(self) -> Result<LoadedConfig, ConfigError> {
        if self.types.len() != 2 {
            return Err(ConfigError::Shape(format!(
                "`types` must have exactly 2 entries, found {}",
                self.types.len()
            )));
        }
        let [t1, t2]: [TypeConfig; 2] = self.types.try_into().expect("length checked");
        let env = EnvSpec {
            b: [
                [measure_from_config(&t1.b_diag), measure_from_config(&t1.b_cross)],
                [measure_from_config(&t2.b_cross), measure_from_config(&t2.b_diag)],
            ],
            c: [measure_from_config(&t1.c), measure_from_config(&t2.c)],
            m: [kernel_from_config(&t1.m)?, kernel_from_config(&t2.m)?],
            horizon: self.horizon,
        };
        let zeta = match self.zeta {
            None => None,
            Some(z) if z.len() == 2 => Some(WeightMeasure {
                zeta: [measure_from_config(&z[0]), measure_from_config(&z[1])],
            }),
            Some(z) => {
                return Err(ConfigError::Shape(format!(
                    "`zeta` must have exactly 2 entries, found {}",
                    z.len()
                )))
            }
        };
        Ok(LoadedConfig {
            env,
            zeta,
            run: self.run.unwrap_or_default(),
            verify: self.verify,
        })
    }
}

fn density_from_config(d: &DensityConfig) -> Density {
    match d {
        DensityConfig::Constant(v) => Density::Constant(*v),
        DensityConfig::PiecewiseLinear(k) => Density::PiecewiseLinear(k.clone()),
        DensityConfig::Table { mesh, values } => Density::Table {
            mesh: mesh.clone(),
            values: values.clone(),
        },
        DensityConfig::Combination(terms) => Density::Combination(
            terms
                .iter()
                .map(|t| (t.scale, density_from_config(&t.density)))
                .collect(),
        ),
    }
}

fn density_to_config(d: &Density) -> DensityConfig {
    match d {
        Density::Constant(v) => DensityConfig::Constant(*v),
        Density::PiecewiseLinear(k) => DensityConfig::PiecewiseLinear(k.clone()),
        Density::Table { mesh, values } => DensityConfig::Table {
            mesh: mesh.clone(),
            values: values.clone(),
        },
        Density::Combination(terms) => DensityConfig::Combination(
            terms
                .iter()
                .map(|(scale, d)| ScaledDensity {
                    scale: *scale,
                    density: density_to_config(d),
                })
                .collect(),
        ),
    }
}

fn measure_from_config(m: &MeasureConfig) -> SignedMeasure {
    SignedMeasure {
        density: density_from_config(&m.density),
        atoms: m
            .atoms
            .iter()
            .map(|a| Atom {
                time: a.t,
                mass: a.mass,
            })
            .collect(),
    }
}

fn measure_to_config(m: &SignedMeasure) -> MeasureConfig {
    MeasureConfig {
        density: density_to_config(&m.density),
        atoms: m
            .atoms
            .iter()
            .map(|a| AtomConfig {
                t: a.time,
                mass: a.mass,
            })
            .collect(),
    }
}

fn component_from_config(c: &ComponentConfig) -> Result<Component, ConfigError> {
    let want = |n: usize| {
        if c.params.len() == n {
            Ok(())
        } else {
            Err(ConfigError::Shape(format!(
                "component {:?} takes {n} params, found {}",
                c.kind,
                c.params.len()
            )))
        }
    };
    let kind = match c.kind {
        ComponentTag::Dirac => {
            want(2)?;
            if c.cap.is_some() {
                return Err(ConfigError::Shape("dirac components take no cap".into()));
            }
            ComponentKind::Dirac {
                z: [c.params[0], c.params[1]],
            }
        }
        ComponentTag::ExpProduct => {
            want(2)?;
            ComponentKind::ExpProduct {
                theta: [c.params[0], c.params[1]],
                cap: c.cap,
            }
        }
        ComponentTag::StableAxis => {
            want(2)?;
            let axis = c.params[0];
            if axis != 1.0 && axis != 2.0 {
                return Err(ConfigError::Shape(format!(
                    "stable_axis axis must be 1 or 2, found {axis}"
                )));
            }
            ComponentKind::StableAxis {
                axis: axis as usize - 1,
                alpha: c.params[1],
                cap: c.cap,
            }
        }
    };
    Ok(Component {
        weight: c.weight,
        kind,
    })
}

fn component_to_config(c: &Component) -> ComponentConfig {
    let (kind, params, cap) = match c.kind {
        ComponentKind::Dirac { z } => (ComponentTag::Dirac, z.to_vec(), None),
        ComponentKind::ExpProduct { theta, cap } => (ComponentTag::ExpProduct, theta.to_vec(), cap),
        ComponentKind::StableAxis { axis, alpha, cap } => {
            (ComponentTag::StableAxis, vec![(axis + 1) as f64, alpha], cap)
        }
    };
    ComponentConfig {
        kind,
        params,
        weight: c.weight,
        cap,
    }
}

fn spatial_from_config(s: &SpatialConfig) -> Result<SpatialMeasure, ConfigError> {
    let list = match s {
        SpatialConfig::One(c) => std::slice::from_ref(c),
        SpatialConfig::Many(v) => v.as_slice(),
    };
    Ok(SpatialMeasure::new(
        list.iter().map(component_from_config).collect::<Result<_, _>>()?,
    ))
}

fn spatial_to_config(s: &SpatialMeasure) -> SpatialConfig {
    SpatialConfig::Many(s.components.iter().map(component_to_config).collect())
}

fn kernel_from_config(k: &KernelConfig) -> Result<JumpKernel, ConfigError> {
    Ok(JumpKernel {
        density_components: k
            .density_components
            .iter()
            .map(|d| {
                Ok(DensityJump {
                    rate: density_from_config(&d.rate),
                    measure: spatial_from_config(&d.measure)?,
                })
            })
            .collect::<Result<_, ConfigError>>()?,
        atoms: k
            .atoms
            .iter()
            .map(|a| {
                Ok(AtomJump {
                    time: a.t,
                    measure: spatial_from_config(&a.measure)?,
                })
            })
            .collect::<Result<_, ConfigError>>()?,
    })
}

fn kernel_to_config(k: &JumpKernel) -> KernelConfig {
    KernelConfig {
        density_components: k
            .density_components
            .iter()
            .map(|d| DensityJumpConfig {
                rate: density_to_config(&d.rate),
                measure: spatial_to_config(&d.measure),
            })
            .collect(),
        atoms: k
            .atoms
            .iter()
            .map(|a| AtomJumpConfig {
                t: a.time,
                measure: spatial_to_config(&a.measure),
            })
            .collect(),
    }
}
