//! Scenario files: TOML with one table per concern and an optional named
//! preset that supplies every value the file leaves out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuum::ElasticModuli;
use crate::error::{Error, Result};
use crate::fem::BodyLoads;
use crate::material::{DamageLaw, DamageModel, MaterialParams};
use crate::mesh::{CavitySequence, MeshSizes, Rect};
use crate::solver::{Algorithm, LinearSolverKind, Loading, Program, SeedBand, SolverConfig};

/// Box bounds and mesh resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub x_min: f64,
    pub x_max: f64,
    /// Bottom of the box (the vertical axis is the second coordinate).
    pub y_min: f64,
    pub y_max: f64,
    pub h_coarse: f64,
    /// Element size inside the refinement band around the cavity.
    pub h_fine: f64,
    pub refinement_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadingKind {
    Excavation,
    Compression,
}

/// Time discretization. Excavation keys describe a rectangular cavity on
/// `cavity_base`, centred at `cavity_center_x`, whose width and height grow
/// linearly over the steps; compression keys describe a top displacement
/// `-rate * t` for `t = duration / steps, ..., duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingConfig {
    pub kind: LoadingKind,
    /// Number of steps M.
    pub steps: usize,
    pub cavity_center_x: f64,
    pub cavity_base: f64,
    pub cavity_width_start: f64,
    pub cavity_width_end: f64,
    pub cavity_height_start: f64,
    pub cavity_height_end: f64,
    pub rate: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    /// Damage model, 1 to 4.
    pub model: u8,
    pub young: f64,
    pub poisson: f64,
    pub w1: f64,
    pub w11: f64,
    pub ell: f64,
    pub kappa: f64,
    /// Exponent of model 3.
    pub p: f64,
    /// Softening parameter of model 4.
    pub k: f64,
    pub eta_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadsConfig {
    pub rho: f64,
    pub grav: f64,
    pub kbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub algorithm: Algorithm,
    pub c_l: f64,
    pub tol_outer: f64,
    pub max_outer: usize,
    pub tol_lin: f64,
    pub tol_kkt: f64,
    pub max_inner_relax: usize,
    pub linear_solver: LinearSolverKind,
    pub record_time: bool,
}

/// Initial damage `value` within `half_width` of the segment `from`–`to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub half_width: f64,
    pub value: f64,
}

/// A complete, self-describing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub output_dir: PathBuf,
    pub geometry: Geometry,
    pub loading: LoadingConfig,
    pub material: MaterialConfig,
    pub loads: LoadsConfig,
    pub solver: SolverSection,
    pub seeds: Vec<SeedConfig>,
}

/// Desk-scale slice: a 1:10 copy of the full-scale section.
impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            x_min: -154.0,
            x_max: 206.0,
            y_min: -50.0,
            y_max: 45.0,
            h_coarse: 16.0,
            h_fine: 2.0,
            refinement_band: 20.0,
        }
    }
}

impl Default for LoadingConfig {
    fn default() -> Self {
        LoadingConfig {
            kind: LoadingKind::Excavation,
            steps: 10,
            cavity_center_x: 26.0,
            cavity_base: 0.0,
            cavity_width_start: 10.0,
            cavity_width_end: 60.0,
            cavity_height_start: 0.0,
            cavity_height_end: 30.0,
            rate: 0.005,
            duration: 1.0,
        }
    }
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            model: 1,
            young: 2.9e10,
            poisson: 0.3,
            w1: 1e6,
            w11: 1e3,
            ell: 0.5,
            kappa: 1.0,
            p: 4.0,
            k: 2.0,
            eta_r: 1e-6,
        }
    }
}

impl Default for LoadsConfig {
    fn default() -> Self {
        LoadsConfig {
            rho: 2700.0,
            grav: 9.81,
            kbar: 1e9,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSection {
            algorithm: c.algorithm,
            c_l: c.c_l,
            tol_outer: c.tol_outer,
            max_outer: c.max_outer,
            tol_lin: c.tol_lin,
            tol_kkt: c.tol_kkt,
            max_inner_relax: c.max_inner_relax,
            linear_solver: c.linear_solver,
            record_time: c.record_time,
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            output_dir: PathBuf::from("output"),
            geometry: Geometry::default(),
            loading: LoadingConfig::default(),
            material: MaterialConfig::default(),
            loads: LoadsConfig::default(),
            solver: SolverSection::default(),
            seeds: Vec::new(),
        }
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 8] = [
    "caving-2d-model1",
    "caving-2d-model2",
    "caving-2d-model3",
    "caving-2d-model4",
    "compression-2d-model1",
    "compression-2d-model2",
    "compression-2d-model3",
    "compression-2d-model4",
];

/// Full-scale vertical section of the caving block with a cavity that
/// widens from 100 m to 600 m and rises to 300 m over ten steps.
fn caving(model: u8) -> Scenario {
    Scenario {
        output_dir: PathBuf::from(format!("output/caving-2d-model{model}")),
        geometry: Geometry {
            x_min: -1540.0,
            x_max: 2060.0,
            y_min: -500.0,
            y_max: 450.0,
            h_coarse: 160.0,
            h_fine: 20.0,
            refinement_band: 200.0,
        },
        loading: LoadingConfig {
            kind: LoadingKind::Excavation,
            steps: 10,
            cavity_center_x: 260.0,
            cavity_base: 0.0,
            cavity_width_start: 100.0,
            cavity_width_end: 600.0,
            cavity_height_start: 0.0,
            cavity_height_end: 300.0,
            ..LoadingConfig::default()
        },
        material: MaterialConfig {
            model,
            w11: if model == 4 { 1e2 } else { 1e3 },
            ell: 5.0,
            ..MaterialConfig::default()
        },
        loads: LoadsConfig::default(),
        solver: SolverSection::default(),
        seeds: Vec::new(),
    }
}

/// Plane-strain section of a 0.12 m × 0.2 m specimen, clamped at the base
/// and shortened by 5 mm at the top, with a diagonal band of damage 0.5.
fn compression(model: u8) -> Scenario {
    Scenario {
        output_dir: PathBuf::from(format!("output/compression-2d-model{model}")),
        geometry: Geometry {
            x_min: 0.0,
            x_max: 0.12,
            y_min: 0.0,
            y_max: 0.2,
            h_coarse: 0.002,
            h_fine: 0.002,
            refinement_band: 0.002,
        },
        loading: LoadingConfig {
            kind: LoadingKind::Compression,
            steps: 10,
            rate: 0.005,
            duration: 1.0,
            ..LoadingConfig::default()
        },
        material: MaterialConfig {
            model,
            w11: 1e6,
            ell: 0.004,
            ..MaterialConfig::default()
        },
        loads: LoadsConfig {
            rho: 0.0,
            grav: 0.0,
            kbar: 0.0,
        },
        solver: SolverSection {
            algorithm: Algorithm::Fast,
            ..SolverSection::default()
        },
        seeds: vec![SeedConfig {
            from: [0.03, 0.06],
            to: [0.09, 0.14],
            half_width: 0.004,
            value: 0.5,
        }],
    }
}

/// Built-in scenario by name.
pub fn preset(name: &str) -> Option<Scenario> {
    let model = |prefix: &str| {
        name.strip_prefix(prefix)
            .and_then(|m| m.parse::<u8>().ok())
            .filter(|m| (1..=4).contains(m))
    };
    if let Some(m) = model("caving-2d-model") {
        Some(caving(m))
    } else {
        model("compression-2d-model").map(compression)
    }
}

fn preset_or_err(name: &str) -> Result<Scenario> {
    preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known presets: {}", PRESETS.join(", "))))
}

/// Overlay `top` onto `base`, recursing into tables; arrays are replaced.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl Scenario {
    /// Parse scenario text. A top-level `preset = "<name>"` key selects the
    /// base values; otherwise the documented defaults are the base.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let base = match table.remove("preset") {
            None => Scenario::default(),
            Some(toml::Value::String(name)) => preset_or_err(&name)?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, table);
        let scenario: Scenario = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Complete TOML text of the scenario, readable by [`load_scenario`].
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check every value through the constructors of the types it feeds.
    pub fn validate(&self) -> Result<()> {
        self.program()?;
        self.solver_config().validate()
    }

    pub fn damage_model(&self) -> Result<DamageModel> {
        let m = &self.material;
        match m.model {
            1 => Ok(DamageModel::Model1),
            2 => Ok(DamageModel::Model2),
            3 => Ok(DamageModel::Model3 { p: m.p }),
            4 => Ok(DamageModel::Model4 { k: m.k }),
            other => Err(Error::invalid("model", format!("must be 1, 2, 3 or 4, got {other}"))),
        }
    }

    pub fn material_params(&self) -> Result<MaterialParams> {
        let m = &self.material;
        MaterialParams::new(
            ElasticModuli::new(m.young, m.poisson)?,
            DamageLaw::new(self.damage_model()?, m.w11)?,
            m.w1,
            m.ell,
            m.kappa,
            m.eta_r,
        )
    }

    pub fn bounds(&self) -> Result<Rect> {
        let g = &self.geometry;
        let all_finite = [g.x_min, g.x_max, g.y_min, g.y_max].iter().all(|v| v.is_finite());
        if !all_finite || g.x_min >= g.x_max || g.y_min >= g.y_max {
            return Err(Error::Geometry(format!(
                "box must satisfy x_min < x_max and y_min < y_max, got [{}, {}] x [{}, {}]",
                g.x_min, g.x_max, g.y_min, g.y_max
            )));
        }
        Ok(Rect::new(g.x_min, g.x_max, g.y_min, g.y_max))
    }

    pub fn loading(&self) -> Result<Loading> {
        let l = &self.loading;
        if l.steps < 1 {
            return Err(Error::invalid("steps", "the number of steps M must be >= 1"));
        }
        let bounds = self.bounds()?;
        let g = &self.geometry;
        let sizes = MeshSizes::new(g.h_coarse, g.h_fine, g.refinement_band)?;
        match l.kind {
            LoadingKind::Excavation => {
                let cavities = CavitySequence::linear(
                    l.cavity_center_x,
                    l.cavity_base,
                    (l.cavity_width_start, l.cavity_width_end),
                    (l.cavity_height_start, l.cavity_height_end),
                    l.steps,
                )?;
                if let Some(r) = cavities.regions().iter().find(|r| !r.is_empty() && !bounds.contains_rect(r)) {
                    return Err(Error::Geometry(format!("cavity {r:?} leaves the box")));
                }
                Ok(Loading::Excavation {
                    bounds,
                    sizes,
                    cavities,
                })
            }
            LoadingKind::Compression => {
                if !(l.rate.is_finite() && l.duration > 0.0 && l.duration.is_finite()) {
                    return Err(Error::invalid(
                        "duration",
                        format!("need a finite rate and duration > 0, got rate {} and duration {}", l.rate, l.duration),
                    ));
                }
                Ok(Loading::Compression {
                    bounds,
                    sizes,
                    rate: l.rate,
                    dt: l.duration / l.steps as f64,
                    steps: l.steps,
                })
            }
        }
    }

    pub fn program(&self) -> Result<Program> {
        let seeds = self
            .seeds
            .iter()
            .map(|s| {
                let band = SeedBand {
                    from: s.from,
                    to: s.to,
                    half_width: s.half_width,
                    value: s.value,
                };
                band.validate().map(|_| band)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Program {
            loading: self.loading()?,
            params: self.material_params()?,
            loads: BodyLoads::new(self.loads.rho, self.loads.grav, self.loads.kbar)?,
            seeds,
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            algorithm: s.algorithm,
            c_l: s.c_l,
            tol_outer: s.tol_outer,
            max_outer: s.max_outer,
            tol_lin: s.tol_lin,
            tol_kkt: s.tol_kkt,
            max_inner_relax: s.max_inner_relax,
            linear_solver: s.linear_solver,
            record_time: s.record_time,
        }
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
