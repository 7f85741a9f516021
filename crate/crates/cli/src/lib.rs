//! Command-line pipeline: dataset generation and extraction, training,
//! prediction, evaluation and the modality comparison.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hoodframe::model::Modality;
use hoodframe::Error;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "hoodframe",
    version,
    about = "Multimodal surrogate models for hood-frame structural performance"
)]
pub struct Cli {
    /// Worker threads for data-parallel kernels. Results are bit-identical
    /// for any thread count.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with analytic targets.
    Gen(GenArgs),
    /// Extract every modality from an STL mesh into a dataset directory.
    Extract(ExtractArgs),
    /// Train a model and write a checkpoint, loss trace and loss plot.
    Train(TrainArgs),
    /// Predict stress, mass and deflection for one record.
    Predict(PredictArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Train both modalities on one split and report their errors.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = hoodframe::geometry::SECTION_LEN)]
    pub section_len: usize,
    #[arg(long, default_value_t = hoodframe::geometry::DEPTH_LEN)]
    pub depth_len: usize,
    /// Upper bound on ribs straddling either slicing plane.
    #[arg(long)]
    pub max_crossing_ribs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Binary or ASCII STL file.
    pub stl: PathBuf,
    /// Rib depths, one number per line or comma separated. Zeros when absent.
    #[arg(long)]
    pub depths: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Record id; defaults to the STL file stem.
    #[arg(long)]
    pub id: Option<String>,
    /// Known targets as `stress,mass,deflection`.
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long, default_value_t = hoodframe::geometry::SECTION_LEN)]
    pub section_len: usize,
    #[arg(long, default_value_t = hoodframe::geometry::DEPTH_LEN)]
    pub depth_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Multi,
    ImageOnly,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Multi => Modality::Multimodal,
            ModalityArg::ImageOnly => Modality::ImageOnly,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint path; the trace and plot are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModalityArg::Multi)]
    pub modality: ModalityArg,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Record directory, or a record id when `--data` is given.
    pub record: String,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fail unless the checkpoint has this modality.
    #[arg(long, value_enum)]
    pub modality: Option<ModalityArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Test,
    Holdout,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Holdout)]
    pub split: SplitArg,
    /// Directory for metrics.csv, residuals.csv and the scatter plots.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Report CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Process exit code for each error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 1,
        Error::Data(_) | Error::Io { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    // A second call in one process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build_global();
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
