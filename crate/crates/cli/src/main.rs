mod extract;
mod interpret;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status 1 for runtime failures, 2 for usage errors.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Parser)]
#[command(name = "parkattn", version, about = "Parkinson's detection with cross-attention over SSL embeddings and informed speech features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condition audio and compute informed-feature vectors.
    Extract(extract::ExtractArgs),
    /// Nested cross-validation on one task.
    Train(TrainArgs),
    /// Leave-one-dataset-out evaluation.
    Crosslingual(CrossArgs),
    /// Embedding or temporal relevance reports for a finished run.
    Interpret(interpret::InterpretArgs),
    /// Write a planted-signal synthetic corpus.
    Synth(synth::SynthArgs),
}

#[derive(Args, Clone, Debug)]
pub struct CommonTrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value = "cross_attn")]
    pub model: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Schema JSON; defaults to `schema.json` next to the manifest, then the built-in schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Any config key, repeatable: `--set scale=key_dim`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Parallel (fold, seed) jobs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonTrainArgs,
    #[arg(long)]
    pub outer_folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
}

#[derive(Args)]
pub struct CrossArgs {
    #[command(flatten)]
    pub common: CommonTrainArgs,
    /// Dataset id to hold out; every dataset in turn when omitted.
    #[arg(long)]
    pub hold_out: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract::run(a),
        Command::Train(a) => train::run_train(a),
        Command::Crosslingual(a) => train::run_crosslingual(a),
        Command::Interpret(a) => interpret::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
