//! Scene configuration document (JSON, UTF-8).
//!
//! Top-level keys: `mesh`, `sensors`, `paths`, `spawn_points`,
//! `distribution`, `catalog`, `signals`, `seed`, `frames`, `dt`. Unknown keys
//! anywhere are rejected. Schema and consistency problems are collected and
//! reported together rather than one at a time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::obj::{parse_obj, ObjError};
use crate::geometry::TriangleMesh;
use crate::palette::SemanticPalette;
use crate::prep::{prepare, PrepConfig, PrepError, PrepSummary, RoiBox, DEFAULT_MIN_COMPONENT_AREA};
use crate::scenario::{
    ActorClass, ClassDistribution, PathLoop, Scenario, SignalController, SpawnPoint, TrafficConfig,
    TrafficParams, DEFAULT_DT,
};
use crate::sensor::{SensorPose, SensorSpec};

pub const SCHEMA_VERSION: u32 = 1;

const REQUIRED: [&str; 8] = ["mesh", "sensors", "paths", "spawn_points", "distribution", "catalog", "seed", "frames"];
const OPTIONAL: [&str; 2] = ["signals", "dt"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scene config has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{}: {source}", path.display())]
    Obj { path: PathBuf, source: ObjError },
    #[error("mesh preparation failed: {0}")]
    Prep(#[from] PrepError),
}

impl ConfigError {
    pub fn is_validation(&self) -> bool {
        matches!(self, ConfigError::Invalid(_) | ConfigError::Prep(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// OBJ file, relative to the config file
    pub path: PathBuf,
    #[serde(default)]
    pub roi: Option<RoiBox>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "default_min_area")]
    pub min_component_area: f64,
}

fn one() -> f64 {
    1.0
}

fn default_min_area() -> f64 {
    DEFAULT_MIN_COMPONENT_AREA
}

impl MeshSection {
    pub fn prep_config(&self) -> PrepConfig {
        PrepConfig { roi: self.roi, scale: self.scale, min_component_area: self.min_component_area }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub name: String,
    pub spec: SensorSpec,
    pub pose: SensorPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub mesh: MeshSection,
    pub sensors: Vec<SensorEntry>,
    pub paths: Vec<PathLoop>,
    pub spawn_points: Vec<SpawnPoint>,
    pub distribution: ClassDistribution,
    pub catalog: Vec<ActorClass>,
    pub signals: Vec<SignalController>,
    pub seed: u64,
    pub frames: u64,
    pub dt: f64,
}

fn section<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<T> {
    let value = obj.get(key)?;
    match serde_json::from_value(value.clone()) {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("`{key}`: {e}"));
            None
        }
    }
}

impl SceneConfig {
    /// Parses and checks a config document, reporting every problem found.
    pub fn from_json_str(text: &str) -> Result<SceneConfig, ConfigError> {
        let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(vec![format!("not valid JSON: {e}")]))?;
        let Value::Object(obj) = root else {
            return Err(ConfigError::Invalid(vec!["top level must be a JSON object".into()]));
        };
        let mut errors = Vec::new();
        for key in obj.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                errors.push(format!("unknown top-level key `{key}`"));
            }
        }
        for key in REQUIRED {
            if !obj.contains_key(key) {
                errors.push(format!("missing required key `{key}`"));
            }
        }
        let mesh = section::<MeshSection>(&obj, "mesh", &mut errors);
        let sensors = section::<Vec<SensorEntry>>(&obj, "sensors", &mut errors);
        let paths = section::<Vec<PathLoop>>(&obj, "paths", &mut errors);
        let spawn_points = section::<Vec<SpawnPoint>>(&obj, "spawn_points", &mut errors);
        let distribution = section::<ClassDistribution>(&obj, "distribution", &mut errors);
        let catalog = section::<Vec<ActorClass>>(&obj, "catalog", &mut errors);
        let signals = section::<Vec<SignalController>>(&obj, "signals", &mut errors);
        let seed = section::<u64>(&obj, "seed", &mut errors);
        let frames = section::<u64>(&obj, "frames", &mut errors);
        let dt = section::<f64>(&obj, "dt", &mut errors);

        let (Some(mesh), Some(sensors), Some(paths), Some(spawn_points), Some(distribution), Some(catalog), Some(seed), Some(frames)) =
            (mesh.clone(), sensors.clone(), paths, spawn_points, distribution, catalog.clone(), seed, frames)
        else {
            // still check the sections that did parse
            errors.extend(mesh.as_ref().map(mesh_problems).unwrap_or_default());
            errors.extend(sensors.as_deref().map(sensor_problems).unwrap_or_default());
            errors.extend(catalog.as_deref().map(catalog_problems).unwrap_or_default());
            return Err(ConfigError::Invalid(errors));
        };
        let config = SceneConfig {
            mesh,
            sensors,
            paths,
            spawn_points,
            distribution,
            catalog,
            signals: signals.unwrap_or_default(),
            seed,
            frames,
            dt: dt.unwrap_or(DEFAULT_DT),
        };
        errors.extend(config.problems());
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn traffic(&self) -> TrafficConfig {
        TrafficConfig {
            paths: self.paths.clone(),
            spawn_points: self.spawn_points.clone(),
            distribution: Some(self.distribution.clone()),
            catalog: self.catalog.clone(),
            signals: self.signals.clone(),
        }
    }

    /// Palette with the catalog's classes registered.
    pub fn palette(&self) -> Result<SemanticPalette, String> {
        let mut palette = SemanticPalette::default();
        for c in &self.catalog {
            match c.semantic_id {
                Some(id) => palette.insert(&c.class, id)?,
                None => {
                    palette.intern(&c.class);
                }
            }
        }
        Ok(palette)
    }

    /// Every consistency problem, in document order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = mesh_problems(&self.mesh);
        out.extend(sensor_problems(&self.sensors));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        out.extend(catalog_problems(&self.catalog));
        if let Err(e) = self.palette() {
            out.push(format!("catalog: {e}"));
        }

        let mut loop_ok = true;
        for (i, p) in self.paths.iter().enumerate() {
            if let Some(reason) = p.closure_problem() {
                out.push(format!("paths[{i}] '{}': {reason}", p.id));
                loop_ok = false;
            }
        }
        if loop_ok {
            match Scenario::new(&self.paths, &self.signals, &self.catalog, TrafficParams::default()) {
                Ok(sc) => {
                    if let Err(e) = sc.spawn_actors(&self.spawn_points, &self.distribution, self.seed) {
                        out.push(format!("spawning: {e}"));
                    }
                }
                Err(e) => out.push(format!("traffic: {e}")),
            }
        }
        out
    }
}

fn mesh_problems(m: &MeshSection) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(roi) = &m.roi {
        if let Err(e) = roi.validate() {
            out.push(format!("mesh: {e}"));
        }
    }
    if !(m.scale > 0.0 && m.scale.is_finite()) {
        out.push(format!("mesh: scale must be positive, got {}", m.scale));
    }
    if !(m.min_component_area >= 0.0) {
        out.push(format!("mesh: min_component_area must be >= 0, got {}", m.min_component_area));
    }
    out
}

fn sensor_problems(sensors: &[SensorEntry]) -> Vec<String> {
    let mut out = Vec::new();
    if sensors.is_empty() {
        out.push("sensors: at least one sensor is required".into());
    }
    let mut names = BTreeSet::new();
    for (i, s) in sensors.iter().enumerate() {
        let safe = !s.name.is_empty() && s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !safe {
            out.push(format!("sensors[{i}]: name '{}' must be non-empty [A-Za-z0-9_-]", s.name));
        }
        if !names.insert(s.name.as_str()) {
            out.push(format!("sensors[{i}]: duplicate name '{}'", s.name));
        }
        if let Err(e) = s.spec.validate() {
            out.push(format!("sensors[{i}] '{}': {e}", s.name));
        }
        let p = &s.pose;
        if !(p.position.is_finite() && p.yaw.is_finite() && p.pitch.is_finite() && p.roll.is_finite()) {
            out.push(format!("sensors[{i}] '{}': pose must be finite", s.name));
        }
    }
    out
}

fn catalog_problems(catalog: &[ActorClass]) -> Vec<String> {
    let mut out = Vec::new();
    let mut classes = BTreeSet::new();
    for (i, c) in catalog.iter().enumerate() {
        if c.class.is_empty() || c.class.chars().any(char::is_whitespace) {
            out.push(format!("catalog[{i}]: class name '{}' must be non-empty without whitespace", c.class));
        }
        if !classes.insert(c.class.as_str()) {
            out.push(format!("catalog[{i}]: duplicate class '{}'", c.class));
        }
    }
    out
}

/// A parsed config with its mesh loaded and prepared.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub config: SceneConfig,
    /// exact bytes the config was parsed from
    pub source: Vec<u8>,
    pub mesh: TriangleMesh,
    pub prep_summary: PrepSummary,
    pub palette: SemanticPalette,
    pub scenario: Scenario,
}

impl LoadedScene {
    pub fn load(path: &Path) -> Result<LoadedScene, ConfigError> {
        let source = std::fs::read(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        let text = String::from_utf8(source.clone())
            .map_err(|_| ConfigError::Invalid(vec!["config is not valid UTF-8".into()]))?;
        let config = SceneConfig::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(config, source, base)
    }

    pub fn from_config(config: SceneConfig, source: Vec<u8>, base_dir: &Path) -> Result<LoadedScene, ConfigError> {
        let mesh_path = base_dir.join(&config.mesh.path);
        let text = std::fs::read_to_string(&mesh_path).map_err(|e| ConfigError::Io { path: mesh_path.clone(), source: e })?;
        let mut palette = config.palette().map_err(|e| ConfigError::Invalid(vec![e]))?;
        let raw = parse_obj(&text, &mut palette).map_err(|e| ConfigError::Obj { path: mesh_path, source: e })?;
        let (mesh, prep_summary) = prepare(&raw, &config.mesh.prep_config())?;
        let scenario = Scenario::new(&config.paths, &config.signals, &config.catalog, TrafficParams::default())
            .map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
        Ok(LoadedScene { config, source, mesh, prep_summary, palette, scenario })
    }
}
