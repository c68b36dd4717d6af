//! Command-line pipeline: synthesize or ingest data, prepare targets,
//! train trackers, evaluate them and label live dialogue.

pub mod commands;
pub mod config;
pub mod prepared;

use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dialtrack::eval::Averaging;
use dialtrack::models::LossPlacement;
use dialtrack::{Error, ErrorClass, ModelKind, Regime};

pub use config::{RunConfig, SplitName, CONFIG_ENV};

/// Pipeline step an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Synth,
    Load,
    Index,
    Embed,
    Target,
    Train,
    Evaluate,
    Predict,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Load => "load",
            Stage::Index => "index",
            Stage::Embed => "embed",
            Stage::Target => "target",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub error: Error,
}

impl CliError {
    pub fn new(stage: Stage, error: Error) -> Self {
        CliError { stage, error }
    }

    pub fn config(error: Error) -> Self {
        Self::new(Stage::Config, error)
    }

    /// 1 for usage and configuration, 2 for data, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self.error.class() {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numeric => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.error)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "dialtrack", version, about = "Joint dialogue domain and topic tracking")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory of prepared artifacts.
    #[arg(long, global = true)]
    pub prepared: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dialogue and article corpus.
    Synth(SynthArgs),
    /// Index articles, embed them and assign topic targets.
    Prepare(PrepareArgs),
    /// Train a tracker on the prepared training split.
    Train(TrainArgs),
    /// Score a checkpoint or a baseline on a prepared split.
    Evaluate(EvaluateArgs),
    /// Label utterances read from stdin, one per line; `RESET` starts a new
    /// session.
    Predict(PredictArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 3 domains, 5 articles, 40 utterances.
    Small,
    /// TourSG-like domain mix.
    Toursg,
    /// Follow-up utterances that only make sense two turns back.
    Followup,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "small")]
    pub preset: Preset,
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long)]
    pub utterances_per_session: Option<usize>,
    #[arg(long)]
    pub articles: Option<usize>,
    #[arg(long)]
    pub followup_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub dialogues: Option<PathBuf>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Number of TF-IDF matches averaged into each target.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_words: Option<usize>,
    /// Topic embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub doc2vec_epochs: Option<usize>,
    /// History length H (fixes the session padding).
    #[arg(long)]
    pub window: Option<usize>,
    /// Separate sessions by `window - 1` NULL slots.
    #[arg(long)]
    pub pad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lrcn,
    Cnn,
    Lstm,
    Random,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Lrcn => ModelKind::Lrcn,
            ModelArg::Cnn => ModelKind::CnnOnly,
            ModelArg::Lstm => ModelKind::LstmOnly,
            ModelArg::Random => ModelKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    #[value(name = "D")]
    D,
    #[value(name = "T")]
    T,
    #[value(name = "D+T")]
    DT,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::D => Regime::D,
            RegimeArg::T => Regime::T,
            RegimeArg::DT => Regime::DT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Micro,
    Macro,
    Weighted,
}

impl From<AveragingArg> for Averaging {
    fn from(a: AveragingArg) -> Self {
        match a {
            AveragingArg::Micro => Averaging::Micro,
            AveragingArg::Macro => Averaging::Macro,
            AveragingArg::Weighted => Averaging::Weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Final,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "lrcn")]
    pub model: ModelArg,
    /// Heads to train; defaults to the config value.
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Run directory; defaults to `<runs>/<model>-<regime>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from `last.ckpt` in the run directory.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda_x: Option<f64>,
    #[arg(long)]
    pub lambda_y: Option<f64>,
    #[arg(long)]
    pub drop_prob: Option<f64>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub filter_height: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_enum)]
    pub loss_placement: Option<PlacementArg>,
    /// Pretrained word vectors in GloVe text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint to score.
    #[arg(long, required_unless_present = "benchmark", conflicts_with = "benchmark")]
    pub checkpoint: Option<PathBuf>,
    /// Score a built-in baseline instead of a checkpoint.
    #[arg(long, value_enum)]
    pub benchmark: Option<Benchmark>,
    #[arg(long, value_enum)]
    pub split: Option<SplitName>,
    #[arg(long, value_enum)]
    pub averaging: Option<AveragingArg>,
    /// Resolve topics among target articles only.
    #[arg(long)]
    pub restrict_to_targets: bool,
    /// Also write the per-utterance table.
    #[arg(long)]
    pub dump_predictions: bool,
    /// Report directory; defaults to `eval-<split>` next to the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Benchmark {
    Random,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(cli, input, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn placement(p: PlacementArg) -> LossPlacement {
    match p {
        PlacementArg::Final => LossPlacement::FinalStep,
        PlacementArg::All => LossPlacement::AllSteps,
    }
}
