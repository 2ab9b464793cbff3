//! `raga-moodkit`: synthesise a corpus, extract features, train, tune,
//! evaluate, classify and build mood-transition playlists.
//!
//! Exit codes: 0 success, 1 invalid arguments or configuration, 2 runtime or
//! data errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raga_moodkit::catalog::{Rasa, ScalerKind};
use raga_moodkit::experiments::SplitLevel;

pub const SEED_ENV: &str = "RAGA_MOODKIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "raga-moodkit", version, about = "Raga/rasa music mood classification")]
pub struct Cli {
    /// Global seed; falls back to $RAGA_MOODKIT_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labelled WAV corpus and its manifest.
    Synth(SynthArgs),
    /// Extract per-segment MFCC features for every manifest entry.
    Extract(ExtractArgs),
    /// Fit one model with fixed parameters.
    Train(TrainArgs),
    /// Grid-search hyperparameters on a holdout split.
    Tune(TuneArgs),
    /// Evaluate a saved model, or run one experiment from a feature store.
    Evaluate(EvaluateArgs),
    /// Score one WAV file.
    Classify(ClassifyArgs),
    /// Build a playlist moving from one rasa to another.
    Recommend(RecommendArgs),
    /// Write the feature correlation matrix as CSV.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub files_per_class: usize,
    /// Seconds per file.
    #[arg(long, default_value_t = 90.0)]
    pub duration: f64,
}

#[derive(Debug, Args, Clone)]
pub struct MfccArgs {
    #[arg(long, default_value_t = 2048)]
    pub fft_size: usize,
    #[arg(long, default_value_t = 512)]
    pub hop: usize,
    #[arg(long, default_value_t = 40)]
    pub filters: usize,
    #[arg(long, default_value_t = 40)]
    pub coeffs: usize,
    #[arg(long, default_value_t = 0.0)]
    pub f_low: f64,
    /// Defaults to the Nyquist frequency.
    #[arg(long)]
    pub f_high: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature store CSV; the config sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Segment cuts as `start:duration,...` in seconds.
    #[arg(long, default_value = "0:60,20:60")]
    pub plan: String,
    #[command(flatten)]
    pub mfcc: MfccArgs,
    /// Fail (exit 2) if any file cannot be processed.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Clone)]
pub struct ParamArgs {
    /// knn, naive_bayes, logreg, svm, forest or mlp.
    #[arg(long)]
    pub family: Option<String>,
    /// Any family parameter as KEY=VALUE (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long = "C", alias = "c")]
    pub c: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub n_estimators: Option<String>,
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long)]
    pub max_depth: Option<String>,
    #[arg(long)]
    pub max_features: Option<String>,
    #[arg(long)]
    pub min_samples_leaf: Option<String>,
    #[arg(long)]
    pub min_samples_split: Option<String>,
    /// Four hidden sizes, e.g. 256x128x64x32.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value = "zscore")]
    pub scaler: ScalerKind,
    #[arg(long, default_value = "file")]
    pub split_level: SplitLevel,
    /// Write the `id,role` split record here.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Hold out this fraction for validation; otherwise fit on every row.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Axes as NAME=v1,v2,... (several may follow one --grid).
    #[arg(long, num_args = 1.., required = true)]
    pub grid: Vec<String>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Save the winning model (fitted on the train split).
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Saved model to score against the whole store.
    #[arg(long, conflicts_with = "family")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, num_args = 1..)]
    pub grid: Vec<String>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    pub wav: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required_unless_present = "store", conflicts_with = "store")]
    pub manifest: Option<PathBuf>,
    /// Precomputed feature store instead of a manifest.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub from: Rasa,
    #[arg(long)]
    pub to: Rasa,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub length: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Error classes that map onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

pub trait OrFail<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: std::fmt::Display> OrFail<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.to_string()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.to_string()))
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Validation(format!("{SEED_ENV}: not an unsigned integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve_seed(cli.seed).and_then(|seed| commands::run(cli.command, seed));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
