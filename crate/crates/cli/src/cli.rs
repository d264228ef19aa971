use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Simulate, detect, featurise and classify critical transitions.
#[derive(Debug, Parser)]
#[command(name = "ctclass", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Simulate one model run and write its trajectory.
    Simulate(SimulateArgs),
    /// Detect transitions in a trajectory.
    Detect(DetectArgs),
    /// Write feature tracks around detected or given onsets.
    Features(FeaturesArgs),
    /// Generate the labelled model corpus.
    Corpus(CorpusArgs),
    /// Train a classifier on the corpus and compute its accuracy curve.
    Train(TrainArgs),
    /// Screen and classify the transitions of a recording.
    Classify(ClassifyArgs),
    /// Feature importance and fit-error reports.
    Report(ReportArgs),
    /// Repeat a command from its manifest.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Detect(_) => "detect",
            Command::Features(_) => "features",
            Command::Corpus(_) => "corpus",
            Command::Train(_) => "train",
            Command::Classify(_) => "classify",
            Command::Report(_) => "report",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// Configuration file; unset keys take their defaults.
    #[arg(long, env = "CTCLASS_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory. It must exist; inputs default to files in it.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Bct,
    Bnct,
    Nct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceArg {
    Model,
    External,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "nct")]
    pub regime: Regime,
    /// End time in seconds (default: `sim.t_end`).
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trajectory CSV (default: `<out>/trajectory.csv`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Seizure annotations CSV (`onset_s,offset_s`).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Search `alpha` over `start:stop:step` against the annotations.
    #[arg(long, value_name = "START:STOP:STEP")]
    pub tune_alpha: Option<String>,
    /// On-threshold; the off-threshold follows as `alpha - 0.01`.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trajectory CSV (default: `<out>/trajectory.csv`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Event log used when no `--t1` is given (default: `<out>/events.csv`).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Onset time; may be repeated.
    #[arg(long = "t1", allow_negative_numbers = true)]
    pub t1: Vec<f64>,
    #[arg(long = "Tminus", allow_negative_numbers = true)]
    pub t_minus: Option<f64>,
    #[arg(long = "Tplus", allow_negative_numbers = true)]
    pub t_plus: Option<f64>,
    #[arg(long = "tm")]
    pub t_m: Option<f64>,
    /// Default: `model` when the trajectory has a `y` column.
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_per_type: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus table (default: `<out>/corpus.csv`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// 1: TSPs, 2: slopes, 3: both.
    #[arg(long)]
    pub svm_type: Option<u8>,
    #[arg(long = "tm")]
    pub t_m: Option<f64>,
    /// Time after onset at which the saved model is trained.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t_eval: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Recording CSV (default: `<out>/trajectory.csv`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Event log (default: `<out>/events.csv`).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Model file (default: `<out>/model.toml`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "Tminus", allow_negative_numbers = true)]
    pub t_minus: Option<f64>,
    #[arg(long = "Tplus", allow_negative_numbers = true)]
    pub t_plus: Option<f64>,
    /// Default: `model` when the recording has a `y` column.
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Permutation importance of the model's features on the corpus test split.
    #[arg(long)]
    pub mpi: bool,
    /// Fit error between classified tracks and the corpus ensembles.
    #[arg(long)]
    pub mffe: bool,
    /// Default: `<out>/corpus.csv`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Default: `<out>/model.toml`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Default: `<out>/classified_tracks.csv`.
    #[arg(long)]
    pub classified: Option<PathBuf>,
    #[arg(long)]
    pub n_perms: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory (default: the one recorded in the manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
