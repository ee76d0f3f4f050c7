//! `dtsim`: digital-twin LiDAR simulation toolkit.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Tool version plus the scene-config schema it reads.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (scene-config schema 1)");

#[derive(Debug, Parser)]
#[command(name = "dtsim", version = VERSION, about = "Digital-twin LiDAR simulation and fidelity evaluation")]
struct Cli {
    /// Cap on worker threads (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop, clean and rescale a scene mesh
    Prep(PrepArgs),
    /// Run the traffic scenario headlessly and report problems
    Validate(ValidateArgs),
    /// Generate labelled LiDAR datasets from a scene config
    Simulate(SimulateArgs),
    /// Score a dataset against a reference dataset or mesh
    Evaluate(EvaluateArgs),
    /// Compare two evaluation reports
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// xmin,ymin,zmin,xmax,ymax,zmax
    #[arg(long, allow_hyphen_values = true)]
    pub roi: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = dtsim_core::prep::DEFAULT_MIN_COMPONENT_AREA)]
    pub min_component_area: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Steps to simulate
    #[arg(long, default_value_t = 1200)]
    pub steps: usize,
    /// Seconds an actor may stand still before it counts as deadlocked
    #[arg(long, default_value_t = dtsim_core::scenario::DEFAULT_DEADLOCK_SECONDS)]
    pub deadlock_seconds: f64,
    /// Print the findings as JSON on stdout
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's frame count
    #[arg(long)]
    pub frames: Option<u64>,
    /// Traffic steps to run before the first frame
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub candidate: PathBuf,
    /// Reference dataset directory, or a `.obj` surface mesh
    #[arg(long)]
    pub reference: PathBuf,
    /// Surface mesh for P2M when the reference is a dataset
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = dtsim_core::metrics::DEFAULT_VOXEL_SIZE)]
    pub voxel_size: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub hist_dir: Option<PathBuf>,
    /// Also record the raw (max) Hausdorff distance per pair
    #[arg(long)]
    pub verbose: bool,
    /// Print the report JSON on stdout
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report of the digital-twin dataset
    #[arg(long)]
    pub dt: PathBuf,
    /// Evaluation report of the dataset it is compared against
    #[arg(long)]
    pub other: PathBuf,
    #[arg(long)]
    pub hist_dir: Option<PathBuf>,
    /// Print the comparison JSON on stdout
    #[arg(long)]
    pub stdout: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Prep(a) => commands::prep(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
