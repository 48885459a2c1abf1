//! `surfseg` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfseg::classifier::Variant;
use surfseg::segment::{DEFAULT_DIST_THRES, DEFAULT_THETA_THRES};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] surfseg::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 usage, 3 I/O, 4 file format, 5 model mismatch.
    fn exit_code(&self) -> u8 {
        use surfseg::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                E::Param(_) | E::Scene(_) => 2,
                E::Io { .. } => 3,
                E::Parse { .. } | E::ModelVersion(_) => 4,
                E::DimensionMismatch { .. } => 5,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "surfseg",
    version,
    about = "Surface segmentation and labelling of spinning-Lidar scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset of scans and a manifest.
    Gen(GenArgs),
    /// Segment one cloud; optionally classify segments with a model.
    Segment(SegmentArgs),
    /// Train a classifier on the manifest's train split.
    Train(TrainArgs),
    /// Evaluate segmentation edges and semantic labels on a split.
    Eval(EvalArgs),
    /// Measure per-stage pipeline latency.
    Bench(BenchArgs),
}

/// Parameters of the segmentation pipeline.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Horizontal sampling interval k (keep every k-th column).
    #[arg(long, default_value_t = 5)]
    pub interval: usize,
    /// Maximum angle between neighbouring normals, radians (15°).
    #[arg(long, default_value_t = DEFAULT_THETA_THRES)]
    pub theta_thres: f64,
    /// Maximum range-normalised distance between neighbours.
    #[arg(long, default_value_t = DEFAULT_DIST_THRES)]
    pub dist_thres: f64,
    /// Histogram bins per normal component.
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Seed for all randomness (falls back to SURFSEG_SEED, then 0).
    #[arg(long, env = "SURFSEG_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of random scenes.
    #[arg(long, default_value_t = 24)]
    pub scenes: usize,
    /// Sensor positions per scene.
    #[arg(long, default_value_t = 12)]
    pub shifts: usize,
    /// Range noise standard deviation in metres.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Horizontal angular step in degrees (0.2° gives 1800 columns).
    #[arg(long, default_value_t = 0.2)]
    pub step: f64,
    /// Skip the x, y and xy mirrored copies of training scans.
    #[arg(long)]
    pub no_augment: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Input cloud file.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Dense label map output (`row col label` per cell).
    #[arg(long)]
    pub labels: PathBuf,
    /// Per-segment feature output.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Classifier model; enables semantic classes.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-segment class output (`label class`); needs --model.
    #[arg(long, requires = "model")]
    pub classes: Option<PathBuf>,
    /// Coloured PLY of the classified cloud; needs --model.
    #[arg(long, requires = "model")]
    pub ply: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Classifier: dt, rdf, ert or knn.
    #[arg(long, default_value = "ert")]
    pub classifier: Variant,
    /// Trees in the forest (rdf, ert).
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Maximum tree depth; unlimited when omitted.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum samples at a node before it may split.
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    /// Features tried per split; floor(sqrt(d)) when omitted.
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Neighbours for knn.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Validation metrics CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads for per-cloud processing.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Classifier model; semantic metrics are skipped without it.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Split to evaluate: train, val or test.
    #[arg(long, default_value = "test")]
    pub split: surfseg::sim::Split,
    /// Semantic metrics CSV (`class,iou,precision,recall,f1`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Edge metrics CSV (`precision,recall,f1,clouds`).
    #[arg(long)]
    pub edge_csv: Option<PathBuf>,
    /// Ground-truth edge dilation radius in cells.
    #[arg(long, default_value_t = 2)]
    pub dilate: usize,
    /// Worker threads for per-cloud processing.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset manifest; unmirrored scans of the split are timed.
    #[arg(long, conflicts_with = "cloud", required_unless_present = "cloud")]
    pub manifest: Option<PathBuf>,
    /// Individual cloud files to time.
    #[arg(long)]
    pub cloud: Vec<PathBuf>,
    /// Split to take clouds from.
    #[arg(long, default_value = "test")]
    pub split: surfseg::sim::Split,
    /// Use at most this many clouds.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Classifier model; the predict stage is empty without it.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Timed passes over the clouds.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Untimed warm-up passes.
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Latency CSV (`stage,avg_ms,max_ms,min_ms`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Segment(a) => commands::segment(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
