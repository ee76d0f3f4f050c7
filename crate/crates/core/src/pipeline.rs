//! End-to-end drivers: scene → labelled datasets, and datasets → fidelity report.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, LoadedScene, SensorEntry};
use crate::dataset::{label_frame, read_dataset, write_dataset, DatasetError, DatasetMeta, LabeledFrame, Manifest};
use crate::geometry::obj::{parse_obj, ObjError};
use crate::geometry::{Bvh, GeometryError, TriangleMesh, Vec3};
use crate::metrics::{
    hausdorff, js_divergence, p2m, EvaluationReport, MetricDistributions, MetricMeans, MetricsError, PairMetrics,
    PointCloud,
};
use crate::palette::SemanticPalette;
use crate::scenario::{Scenario, ScenarioError, WorldState};
use crate::sensor::{build_scan_pattern, scan_frame, SceneObject, SceneSnapshot, SensorError, SensorPose};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{}: {source}", path.display())]
    Obj { path: PathBuf, source: ObjError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Whether the failure stems from invalid input rather than I/O.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Config(e) => e.is_validation(),
            PipelineError::Dataset(_) | PipelineError::Obj { .. } | PipelineError::Io { .. } => false,
            _ => true,
        }
    }
}

/// World geometry at the current step: the static scene plus one box per actor.
pub fn build_snapshot(
    static_scene: &SceneObject,
    world: &WorldState,
    scenario: &Scenario,
    palette: &SemanticPalette,
    frame: u64,
) -> Result<SceneSnapshot, PipelineError> {
    let mut objects = Vec::with_capacity(world.actors.len() + 1);
    objects.push(static_scene.clone());
    for actor in &world.actors {
        let class = scenario.class(&actor.class).ok_or_else(|| ScenarioError::UnknownClass(actor.class.clone()))?;
        let tag = palette.id(&actor.class).ok_or_else(|| ScenarioError::UnknownClass(actor.class.clone()))?;
        let center = actor.position + Vec3::new(0.0, 0.0, class.dz / 2.0);
        let mesh = TriangleMesh::oriented_box(center, class.dims(), actor.heading, tag)?;
        objects.push(SceneObject::new(mesh, actor.track_id)?);
    }
    Ok(SceneSnapshot { frame, time: world.time, objects })
}

#[derive(Debug, Clone)]
pub struct SensorDataset {
    pub sensor: SensorEntry,
    pub frames: Vec<LabeledFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub frames: u64,
    pub warmup_steps: usize,
}

/// Spawns traffic, runs the warm-up, then scans and labels `frames` steps
/// for every sensor. Frame `k` is captured at the state reached after
/// warm-up plus `k` steps.
pub fn simulate(scene: &LoadedScene, options: &SimulationOptions) -> Result<Vec<SensorDataset>, PipelineError> {
    let cfg = &scene.config;
    let static_scene = SceneObject::new(scene.mesh.clone(), 0)?;
    let patterns = cfg
        .sensors
        .iter()
        .map(|s| build_scan_pattern(&s.spec))
        .collect::<Result<Vec<_>, _>>()?;
    let mut world = scene.scenario.spawn_actors(&cfg.spawn_points, &cfg.distribution, cfg.seed)?;
    for _ in 0..options.warmup_steps {
        world = scene.scenario.step(&world, cfg.dt)?;
    }
    let mut out: Vec<SensorDataset> =
        cfg.sensors.iter().map(|s| SensorDataset { sensor: s.clone(), frames: Vec::new() }).collect();
    for frame in 0..options.frames {
        let snapshot = build_snapshot(&static_scene, &world, &scene.scenario, &scene.palette, frame)?;
        for (k, (ds, pattern)) in out.iter_mut().zip(&patterns).enumerate() {
            let raw = scan_frame(&ds.sensor.spec, pattern, &ds.sensor.pose, &snapshot, cfg.seed, k as u64);
            ds.frames.push(label_frame(&raw, &world, &scene.scenario, &scene.palette)?);
        }
        world = scene.scenario.step(&world, cfg.dt)?;
    }
    Ok(out)
}

/// One dataset directory per sensor, named after the sensor.
pub fn write_datasets(
    datasets: &[SensorDataset],
    palette: &SemanticPalette,
    out_dir: &Path,
) -> Result<Vec<(PathBuf, Manifest)>, PipelineError> {
    datasets
        .iter()
        .map(|ds| {
            let dir = out_dir.join(&ds.sensor.name);
            let meta = DatasetMeta {
                sensor_name: ds.sensor.name.clone(),
                spec: ds.sensor.spec.clone(),
                pose: ds.sensor.pose,
                palette: palette.clone(),
            };
            let manifest = write_dataset(&ds.frames, &dir, &meta)?;
            Ok((dir, manifest))
        })
        .collect()
}

/// Frame points moved from the sensor frame back to the world frame.
pub fn world_cloud(frame: &LabeledFrame, pose: &SensorPose) -> PointCloud {
    let t = pose.transform();
    PointCloud { points: frame.xyz().map(|p| t.apply(p)).collect(), frame: Some(frame.frame) }
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })?;
    let mut palette = SemanticPalette::default();
    parse_obj(&text, &mut palette).map_err(|e| PipelineError::Obj { path: path.to_path_buf(), source: e })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Another dataset, optionally with the surface mesh for P2M.
    Dataset { dir: PathBuf, mesh: Option<PathBuf> },
    /// A surface mesh only; just P2M is computed.
    Mesh(PathBuf),
}

impl Reference {
    /// A path ending in `.obj` is a mesh, anything else a dataset directory.
    pub fn from_path(path: &Path, mesh: Option<PathBuf>) -> Reference {
        let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
        if is_obj {
            Reference::Mesh(path.to_path_buf())
        } else {
            Reference::Dataset { dir: path.to_path_buf(), mesh }
        }
    }

    fn describe(&self) -> String {
        match self {
            Reference::Dataset { dir, .. } => dir.display().to_string(),
            Reference::Mesh(p) => p.display().to_string(),
        }
    }
}

/// Scores every candidate frame against the reference. Frames are paired by
/// position; all clouds are compared in the world frame.
pub fn evaluate(
    candidate: &Path,
    reference: &Reference,
    voxel_size: f64,
    verbose: bool,
) -> Result<EvaluationReport, PipelineError> {
    let (cand_manifest, cand_frames) = read_dataset(candidate)?;
    let cand: Vec<PointCloud> = cand_frames.iter().map(|f| world_cloud(f, &cand_manifest.sensor_pose)).collect();

    let (ref_clouds, mesh_path) = match reference {
        Reference::Dataset { dir, mesh } => {
            let (m, frames) = read_dataset(dir)?;
            (Some(frames.iter().map(|f| world_cloud(f, &m.sensor_pose)).collect::<Vec<_>>()), mesh.clone())
        }
        Reference::Mesh(p) => (None, Some(p.clone())),
    };
    let surface = match mesh_path {
        Some(p) => {
            let mesh = load_mesh(&p)?;
            let bvh = Bvh::build(&mesh)?;
            Some((mesh, bvh))
        }
        None => None,
    };

    let n_pairs = match &ref_clouds {
        Some(r) => cand.len().min(r.len()),
        None => cand.len(),
    };
    if n_pairs == 0 {
        return Err(MetricsError::NoPairs.into());
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut distributions = MetricDistributions::default();
    for (i, a) in cand.iter().take(n_pairs).enumerate() {
        let mut pm = PairMetrics { candidate_frame: a.frame.unwrap_or(i as u64), ..Default::default() };
        if let Some(refs) = &ref_clouds {
            let b = &refs[i];
            pm.reference_frame = b.frame;
            let h = hausdorff(a, b)?;
            pm.hausdorff_p95 = Some(h.p95);
            if verbose {
                pm.hausdorff_max = Some(h.max);
            }
            distributions.hausdorff.extend_from_slice(&h.distances);
            let j = js_divergence(a, b, voxel_size)?;
            pm.jsd = Some(j);
            distributions.jsd.push(j);
        }
        if let Some((mesh, bvh)) = &surface {
            let r = p2m(a, bvh, mesh)?;
            pm.p2m_mean = Some(r.mean);
            distributions.p2m.extend_from_slice(&r.distances);
        }
        pairs.push(pm);
    }
    Ok(EvaluationReport {
        candidate: candidate.display().to_string(),
        reference: reference.describe(),
        voxel_size,
        means: MetricMeans::of(&pairs),
        pairs,
        distributions,
    })
}
