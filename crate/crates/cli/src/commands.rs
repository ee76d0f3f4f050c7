use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dtsim_core::config::{ConfigError, LoadedScene, SceneConfig, SCHEMA_VERSION};
use dtsim_core::dataset::{atomic_write, DatasetError};
use dtsim_core::geometry::obj::{parse_obj, write_obj};
use dtsim_core::metrics::{aggregate, emit_histograms, EvaluationReport, FidelityReport};
use dtsim_core::pipeline::{self, PipelineError, Reference, SimulationOptions};
use dtsim_core::prep::{prepare, PrepConfig, PrepError, RoiBox};
use dtsim_core::scenario::{validate_scenario, ValidationParams};
use dtsim_core::{SemanticPalette, Vec3};

use crate::{EvaluateArgs, PrepArgs, ReportArgs, SimulateArgs, ValidateArgs};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Validation(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// A closed pipe on stdout is not an error.
fn emit_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn parse_roi(text: &str) -> Result<RoiBox, CliError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("--roi '{text}': expected six comma-separated numbers")))?;
    let [x0, y0, z0, x1, y1, z1] = v[..] else {
        return Err(CliError::Validation(format!("--roi '{text}': expected six numbers, got {}", v.len())));
    };
    RoiBox::new(Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1)).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn prep(args: &PrepArgs) -> Result<(), CliError> {
    let roi = args.roi.as_deref().map(parse_roi).transpose()?;
    let text = fs::read_to_string(&args.input).map_err(|e| io_err(&args.input, e))?;
    let mut palette = SemanticPalette::default();
    let mesh = parse_obj(&text, &mut palette).map_err(|e| io_err(&args.input, e))?;
    let config = PrepConfig { roi, scale: args.scale, min_component_area: args.min_component_area };
    let (cleaned, summary) = prepare(&mesh, &config).map_err(|e| match e {
        PrepError::EmptyResult(roi) => CliError::Validation(format!("ROI {roi} excludes every triangle of {}", args.input.display())),
        other => CliError::Validation(other.to_string()),
    })?;
    atomic_write(&args.out, write_obj(&cleaned, &palette).as_bytes())?;
    eprintln!("{summary}");
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let source = fs::read_to_string(&args.scene).map_err(|e| io_err(&args.scene, e))?;
    let config = SceneConfig::from_json_str(&source)?;
    let params = ValidationParams { steps: args.steps, dt: config.dt, deadlock_seconds: args.deadlock_seconds, ..Default::default() };
    let report = validate_scenario(&config.traffic(), config.seed, &params);
    if args.stdout {
        emit_stdout(format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")).as_bytes())?;
    }
    eprintln!("ran {} steps, {} finding(s)", report.steps_run, report.findings.len());
    for f in &report.findings {
        eprintln!("  {f}");
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("scenario {} failed validation", args.scene.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load_ms: u128,
    pub simulate_ms: u128,
    pub write_ms: u128,
}

/// Run-level record written next to the per-sensor datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema_version: u32,
    /// SHA-256 of the scene config bytes
    pub config_sha256: String,
    pub seed: u64,
    pub frames: u64,
    pub warmup_steps: usize,
    pub mesh_triangles: usize,
    pub outputs: Vec<String>,
    /// wall-clock, not reproducible
    pub timings: StageTimings,
}

pub const RUN_MANIFEST: &str = "run_manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

/// Refuses to replace anything that is not an earlier simulate output.
fn check_replaceable(out: &Path) -> Result<(), CliError> {
    if !out.exists() {
        return Ok(());
    }
    let empty = fs::read_dir(out).map_err(|e| io_err(out, e))?.next().is_none();
    if empty || out.join(RUN_MANIFEST).is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{} exists and is not a previous simulate output; refusing to overwrite", out.display())))
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let scene = LoadedScene::load(&args.scene)?;
    let frames = args.frames.unwrap_or(scene.config.frames);
    eprintln!("mesh: {}", scene.prep_summary);
    check_replaceable(&args.out)?;
    let load_ms = t0.elapsed().as_millis();

    let t1 = Instant::now();
    let options = SimulationOptions { frames, warmup_steps: args.warmup };
    let datasets = pipeline::simulate(&scene, &options)?;
    let simulate_ms = t1.elapsed().as_millis();

    let t2 = Instant::now();
    let staging = staging_dir(&args.out);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
    }
    let result = (|| {
        fs::create_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        let written = pipeline::write_datasets(&datasets, &scene.palette, &staging)?;
        let outputs = written
            .iter()
            .map(|(dir, _)| dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            config_sha256: sha256_hex(&scene.source),
            seed: scene.config.seed,
            frames,
            warmup_steps: args.warmup,
            mesh_triangles: scene.mesh.len(),
            outputs,
            timings: StageTimings { load_ms, simulate_ms, write_ms: t2.elapsed().as_millis() },
        };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        atomic_write(&staging.join(RUN_MANIFEST), &json)?;
        if args.out.exists() {
            fs::remove_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
        }
        fs::rename(&staging, &args.out).map_err(|e| io_err(&args.out, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result?;
    let points: usize = datasets.iter().flat_map(|d| &d.frames).map(|f| f.points.len()).sum();
    eprintln!(
        "wrote {} sensor dataset(s), {frames} frame(s) each, {points} points to {}",
        datasets.len(),
        args.out.display()
    );
    Ok(())
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut json = serde_json::to_vec_pretty(value).expect("report serializes");
    json.push(b'\n');
    json
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    if !(args.voxel_size > 0.0 && args.voxel_size.is_finite()) {
        return Err(CliError::Validation(format!("--voxel-size must be positive, got {}", args.voxel_size)));
    }
    if args.out.is_none() && !args.stdout {
        return Err(CliError::Validation("give --out <report.json> and/or --stdout".into()));
    }
    let reference = Reference::from_path(&args.reference, args.mesh.clone());
    let report = pipeline::evaluate(&args.candidate, &reference, args.voxel_size, args.verbose)?;
    let json = to_json(&report);
    if let Some(out) = &args.out {
        atomic_write(out, &json)?;
    }
    if args.stdout {
        emit_stdout(&json)?;
    }
    if let Some(dir) = &args.hist_dir {
        emit_histograms(&report.distributions, None, dir)?;
    }
    let m = &report.means;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    eprintln!(
        "{} pair(s): P95 Hausdorff {}  JS divergence {}  P2M {}",
        report.pairs.len(),
        show(m.hausdorff_p95),
        show(m.jsd),
        show(m.p2m_mean)
    );
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: not an evaluation report: {e}", path.display())))
}

/// Change of the DT mean relative to the other dataset, e.g. `-70.2%`.
pub fn format_change(reduction: Option<f64>) -> String {
    match reduction {
        None => "n/a".into(),
        Some(0.0) => "0.0%".into(),
        Some(r) => format!("{:+.1}%", -r),
    }
}

pub fn render_table(r: &FidelityReport) -> String {
    let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    let rows = [
        ("P95 Hausdorff", r.dt_means.hausdorff_p95, r.other_means.hausdorff_p95, r.reduction_percent.hausdorff_p95),
        ("JS Divergence", r.dt_means.jsd, r.other_means.jsd, r.reduction_percent.jsd),
        ("P2M", r.dt_means.p2m_mean, r.other_means.p2m_mean, r.reduction_percent.p2m_mean),
    ];
    let mut out = format!("{:<15} {:>10} {:>10} {:>9}\n", "metric", "DT", "other", "change");
    for (name, a, b, red) in rows {
        out.push_str(&format!("{:<15} {:>10} {:>10} {:>9}\n", name, cell(a), cell(b), format_change(red)));
    }
    for (name, _, _, red) in rows {
        out.push_str(&format!("{name}: {}\n", format_change(red)));
    }
    out
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let dt = read_report(&args.dt)?;
    let other = read_report(&args.other)?;
    let comparison = aggregate(&dt.pairs, &other.pairs).map_err(|e| CliError::Validation(e.to_string()))?;
    eprint!("{}", render_table(&comparison));
    if args.stdout {
        emit_stdout(&to_json(&comparison))?;
    }
    if let Some(dir) = &args.hist_dir {
        emit_histograms(&dt.distributions, Some(&other.distributions), dir)?;
    }
    Ok(())
}
