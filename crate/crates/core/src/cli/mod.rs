//! The `wfkit` command line: one subcommand per pipeline stage, each
//! reading and writing files so stages can be run and checked separately.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or arguments
//! (including a missing `--seed` on a randomized command), 3 internal
//! error.

mod commands;
mod config;

pub use config::{load_grid_file, FileConfig};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::capture::CaptureError;
use crate::dataset::DatasetError;
use crate::eval::EvalError;
use crate::learners::LearnError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CaptureError> for CliError {
    fn from(e: CaptureError) -> Self {
        match e {
            CaptureError::Io(e) => e.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(e) => e.into(),
            DatasetError::Csv(e) if e.is_io_error() => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Dataset(d) => d.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Learn(l) => l.into(),
            EvalError::Dataset(d) => d.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Dataset(d) => d.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wfkit", version, about = "Website-fingerprinting pipeline: captures to flows to features to classifiers")]
pub struct Cli {
    /// TOML file with default settings; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic captures or datasets with known labels.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Parse a capture, assemble flows and write them as CSV.
    Ingest(IngestArgs),
    /// Compute the feature vector of every flow.
    Featurize(FeaturizeArgs),
    /// Attach monitored-site labels to featurized flows.
    Label(LabelArgs),
    /// Stratified train/validation/test split.
    Split(SplitArgs),
    /// Fit one model on the training partition.
    Train(TrainArgs),
    /// Grid-search models with cross-validation on the training partition.
    Tune(TuneArgs),
    /// Score saved models on the test partition.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// A pcapng capture plus its monitored list and ground truth.
    Capture(SynthCaptureArgs),
    /// A labeled feature dataset sampled directly.
    Dataset(SynthDatasetArgs),
}

#[derive(Debug, Args)]
pub struct SynthCaptureArgs {
    #[arg(long, default_value_t = 5)]
    pub sites: usize,
    /// Untargeted traffic sources.
    #[arg(long, default_value_t = 2)]
    pub background: usize,
    /// Visits per site.
    #[arg(long, default_value_t = 3)]
    pub visits: usize,
    /// Random seed; required unless the --config file sets `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for capture.pcapng, monitored.txt and
    /// ground_truth.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthDatasetArgs {
    #[arg(long, default_value_t = 20)]
    pub sites: usize,
    #[arg(long, default_value_t = 0)]
    pub background: usize,
    /// Rows per profile.
    #[arg(long, default_value_t = 200)]
    pub rows: usize,
    #[arg(long, default_value_t = 5.0)]
    pub separability: f64,
    /// Fraction of targeted rows, e.g. 0.2163.
    #[arg(long)]
    pub imbalance: Option<f64>,
    /// Random seed; required unless the --config file sets `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub capture: PathBuf,
    /// Seconds of inactivity that close a flow [default: 120].
    #[arg(long)]
    pub idle_timeout: Option<f64>,
    /// Maximum flow age in seconds [default: 3600].
    #[arg(long)]
    pub active_timeout: Option<f64>,
    /// Do not close TCP flows on FIN/RST.
    #[arg(long)]
    pub no_tcp_close: bool,
    /// Output flow CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Flow CSV written by `ingest`.
    pub flows: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Flow CSV written by `ingest`.
    pub flows: PathBuf,
    /// Feature CSV written by `featurize` from the same flows.
    pub features: PathBuf,
    /// Monitored list (`label,address-or-cidr` lines).
    #[arg(long)]
    pub monitored: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub dataset: PathBuf,
    /// train,validation,test fractions [default: 0.7,0.15,0.15].
    #[arg(long)]
    pub ratios: Option<String>,
    /// Label to stratify on: binary or multiclass [default: multiclass].
    #[arg(long)]
    pub stratify: Option<String>,
    /// Random seed; required unless the --config file sets `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for train.csv, validation.csv and test.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `split`.
    pub split: PathBuf,
    #[arg(long)]
    pub model: String,
    /// binary or multiclass [default: binary].
    #[arg(long)]
    pub task: Option<String>,
    /// Hyperparameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Random seed; required unless the --config file sets `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Directory written by `split`.
    pub split: PathBuf,
    /// Model kinds, comma separated [default: all seven].
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// binary or multiclass [default: binary].
    #[arg(long)]
    pub task: Option<String>,
    /// TOML grid file; kinds it does not list use their default grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Cross-validation folds [default: 5].
    #[arg(long)]
    pub folds: Option<usize>,
    /// accuracy or f1 [default: accuracy].
    #[arg(long)]
    pub scoring: Option<String>,
    /// Random seed; required unless the --config file sets `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for one model file and one grid CSV per kind.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `split`.
    pub split: PathBuf,
    /// Model files, or directories of `*.model.json` files.
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    /// Positive class for binary averaging [default: targeted].
    #[arg(long)]
    pub positive_class: Option<String>,
    /// binary, macro or weighted [default: binary for binary models,
    /// weighted otherwise].
    #[arg(long)]
    pub averaging: Option<String>,
    /// Report file; CSV when the name ends in `.csv`, aligned text
    /// otherwise. The text table is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run the command.
/// Returns the process exit code; diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| commands::dispatch(cli)));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if let CliError::Invalid(msg) = &e {
                if msg.contains("--seed") {
                    eprintln!("usage: rerun with --seed <N> or set `seed` in the --config file");
                }
            }
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            3
        }
    }
}
