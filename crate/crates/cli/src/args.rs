use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tseg_core::datapipe::Experiment;

/// Thermal cloud segmentation pipeline.
///
/// Settings resolve as command-line flags, then `TSEG_*` environment
/// variables, then `key = value` lines of the `--config` file.
#[derive(Debug, Parser)]
#[command(name = "tseg", version)]
pub struct Cli {
    /// Directory all relative paths are resolved against.
    #[arg(long, global = true, env = "TSEG_WORKDIR")]
    pub workdir: Option<PathBuf>,
    /// `key = value` settings file (keys are long flag names).
    #[arg(long, global = true, env = "TSEG_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic labelled scenes for one mission.
    Synth(SynthArgs),
    /// Resample, crop and normalize a directory of scenes into a manifest.
    Prepare(PrepareArgs),
    /// Assign scenes of a manifest to spatially blocked folds.
    Folds(FoldsArgs),
    /// Train one experiment instance (or all folds) and evaluate on its test split.
    Train(TrainArgs),
    /// Evaluate a checkpoint: replay a run's test split or score a manifest.
    Eval(EvalArgs),
    /// Tiled inference on a full scene.
    Infer(InferArgs),
    /// Time tiled inference.
    Bench(BenchArgs),
    /// Compare tiled against single-pass inference.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MissionArg {
    L7,
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SpecArg {
    Default,
    Compact,
}

impl SpecArg {
    pub fn spec(self) -> tseg_core::model::ModelSpec {
        match self {
            Self::Default => tseg_core::model::ModelSpec::default(),
            Self::Compact => tseg_core::model::ModelSpec::compact(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, env = "TSEG_MISSION")]
    pub mission: MissionArg,
    #[arg(long, env = "TSEG_SCENES")]
    pub scenes: usize,
    #[arg(long, env = "TSEG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `<scene>.band` and `<scene>.label.pgm`.
    #[arg(long, env = "TSEG_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "TSEG_WIDTH")]
    pub width: Option<usize>,
    #[arg(long, env = "TSEG_HEIGHT")]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepareArgs {
    /// Directory of `<scene>.band` files with `<scene>.label.pgm` labels.
    #[arg(long = "scenes-dir", env = "TSEG_SCENES_DIR")]
    pub scenes_dir: PathBuf,
    #[arg(long, env = "TSEG_DATASET_ID")]
    pub dataset_id: String,
    #[arg(long, env = "TSEG_TARGET_GSD", default_value_t = 200.0)]
    pub target_gsd: f64,
    /// Manifest path; crops go to `<stem>_crops/` beside it.
    #[arg(long, env = "TSEG_OUT")]
    pub out: PathBuf,
    /// Also record a spatial fold plan with this many folds in the manifest.
    #[arg(long, env = "TSEG_FOLDS_K")]
    pub folds_k: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FoldsArgs {
    #[arg(long, env = "TSEG_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long, env = "TSEG_K", default_value_t = tseg_core::datapipe::DEFAULT_FOLDS)]
    pub k: usize,
    #[arg(long, env = "TSEG_OUT")]
    pub out: PathBuf,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: tseg_core::datapipe::DataError| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// f2f2, l7l7, l7f2 or jointf2.
    #[arg(long, env = "TSEG_EXPERIMENT", value_parser = parse_experiment)]
    pub experiment: Experiment,
    #[arg(long, env = "TSEG_L7")]
    pub l7: Option<PathBuf>,
    #[arg(long, env = "TSEG_F2")]
    pub f2: Option<PathBuf>,
    /// Fold plan from `tseg folds`; computed from the F2 manifest if absent.
    #[arg(long, env = "TSEG_FOLDS")]
    pub folds: Option<PathBuf>,
    #[arg(long, env = "TSEG_K", default_value_t = tseg_core::datapipe::DEFAULT_FOLDS)]
    pub k: usize,
    /// Test fold (F2 experiments only).
    #[arg(long, env = "TSEG_FOLD", conflicts_with = "all_folds")]
    pub fold: Option<usize>,
    /// Run every test fold and write an aggregate report.
    #[arg(long, env = "TSEG_ALL_FOLDS")]
    pub all_folds: bool,
    #[arg(long, env = "TSEG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "TSEG_SPEC", value_enum, default_value_t = SpecArg::Default)]
    pub spec: SpecArg,
    #[arg(long, env = "TSEG_EPOCHS", default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, env = "TSEG_BATCH_SIZE", default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, env = "TSEG_LR", default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, env = "TSEG_PATIENCE", default_value_t = 10)]
    pub patience: usize,
    #[arg(long, env = "TSEG_FREEZE_ENCODER", default_value_t = true, action = ArgAction::Set)]
    pub freeze_encoder: bool,
    #[arg(long, env = "TSEG_THRESHOLD", default_value_t = 0.5)]
    pub threshold: f32,
    /// Parent directory of run directories.
    #[arg(long, env = "TSEG_RUNS", default_value = "runs")]
    pub runs: PathBuf,
    #[arg(long, env = "TSEG_CURVE_POINTS", default_value_t = 1000)]
    pub curve_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Run directory written by `tseg train`; replays its test split.
    #[arg(long, env = "TSEG_RUN", conflicts_with_all = ["checkpoint", "manifest"])]
    pub run: Option<PathBuf>,
    #[arg(long, env = "TSEG_CHECKPOINT", requires = "manifest")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "TSEG_MANIFEST", requires = "checkpoint")]
    pub manifest: Option<PathBuf>,
    /// Output directory (default `<run>/eval`).
    #[arg(long, env = "TSEG_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "TSEG_BATCH_SIZE", default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, env = "TSEG_CURVE_POINTS", default_value_t = 1000)]
    pub curve_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InferArgs {
    #[arg(long, env = "TSEG_CHECKPOINT")]
    pub checkpoint: PathBuf,
    #[arg(long, env = "TSEG_INPUT")]
    pub input: PathBuf,
    /// Binary mask PGM (0 clear, 255 cloud).
    #[arg(long, env = "TSEG_MASK")]
    pub mask: PathBuf,
    /// Probability raster in the band container format.
    #[arg(long, env = "TSEG_PROBS")]
    pub probs: Option<PathBuf>,
    #[arg(long, env = "TSEG_BUDGET_MIB", default_value_t = 512)]
    pub budget_mib: usize,
}

/// Model and scene selection shared by `bench` and `compare`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SceneModelArgs {
    /// Trained checkpoint; without one a freshly initialized model is used.
    #[arg(long, env = "TSEG_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "TSEG_SPEC", value_enum, default_value_t = SpecArg::Default)]
    pub spec: SpecArg,
    #[arg(long, env = "TSEG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Scene in the band container format.
    #[arg(long, env = "TSEG_INPUT", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate a synthetic F2 scene of `WIDTHxHEIGHT` instead.
    #[arg(long, env = "TSEG_SYNTHETIC")]
    pub synthetic: Option<String>,
    #[arg(long, env = "TSEG_BUDGET_MIB", default_value_t = 512)]
    pub budget_mib: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneModelArgs,
    #[arg(long, env = "TSEG_REPS", default_value_t = 5)]
    pub reps: usize,
    #[arg(long, env = "TSEG_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scene: SceneModelArgs,
    /// Label PGM for the macro-F1 delta; synthetic scenes bring their own.
    #[arg(long, env = "TSEG_TRUTH")]
    pub truth: Option<PathBuf>,
    #[arg(long, env = "TSEG_OUT")]
    pub out: Option<PathBuf>,
}
