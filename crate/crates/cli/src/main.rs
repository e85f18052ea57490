//! `multigrasp`: synthesize scenes, build labels, train, predict, evaluate
//! and export colorized clouds.

mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "multigrasp", version, about = "Multi-gripper grasp detection on synthetic point clouds")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for scene-level parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic tabletop scenes with ground-truth grasps.
    Synth(SynthArgs),
    /// Build graspness label maps from scene ground truth.
    Labels(LabelsArgs),
    /// Train the per-point predictor.
    Train(TrainArgs),
    /// Detect grasps for both grippers.
    Predict(PredictArgs),
    /// Score predicted grasps and optionally run clearing simulations.
    Eval(EvalArgs),
    /// Write a scene colored by one graspness channel.
    ExportPly(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    #[arg(long, default_value_t = 5)]
    pub objects: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated primitive kinds: box, sphere, cylinder, plane_slab.
    #[arg(long)]
    pub kinds: Option<String>,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// Defaults to the scene directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss log; defaults to the checkpoint path with a .csv extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Gradient surgery between the parallel and vacuum tasks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub pcgrad: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated hidden layer sizes.
    #[arg(long)]
    pub hidden: Option<String>,
}

#[derive(Debug, Args)]
pub struct HeadArgs {
    #[arg(long, conflicts_with = "fallback_head")]
    pub checkpoint: Option<PathBuf>,
    /// Use ground-truth maps and exhaustive bin search instead of a model.
    #[arg(long)]
    pub fallback_head: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub head: HeadArgs,
    /// Comma-separated subset of parallel, vacuum.
    #[arg(long, default_value = "parallel,vacuum")]
    pub grippers: String,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// Directory written by `predict`.
    #[arg(long)]
    pub grasps: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest k of Precision@k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also simulate table clearing with the given head.
    #[arg(long)]
    pub clearing: bool,
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long, default_value = "parallel,vacuum")]
    pub grippers: String,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Scene path, with or without extension.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// objectness, parallel or vacuum.
    #[arg(long, default_value = "vacuum")]
    pub channel: String,
    /// Labels file to color by; ground-truth labels are used otherwise.
    #[arg(long, conflicts_with = "checkpoint")]
    pub labels: Option<PathBuf>,
    /// Color by model predictions.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub ascii: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
