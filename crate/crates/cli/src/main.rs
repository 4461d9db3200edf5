//! `lc-intent`: synthetic corpora, features, datasets, training, evaluation
//! and sweeps from one config file plus flag overrides.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lc-intent", version, about = "Lane-change intention recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic freeway corpus
    Synth(SynthArgs),
    /// Write the per-frame feature table of every ego vehicle
    Features(CorpusArgs),
    /// Build the balanced train/test sample tables
    Dataset(CorpusArgs),
    /// Train one model and evaluate it on the test split
    Train(ModelArgs),
    /// Cross-validate one model on the training split
    Crossval(ModelArgs),
    /// Time single-threaded training of one or all models
    Bench(BenchArgs),
    /// Tree-count or window-length sweep
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random component
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run on one worker thread
    #[arg(long)]
    pub single_thread: bool,
    /// Zero timing fields so repeated runs are byte-identical
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Scale the 478/240/305 LK/LLC/RLC counts; without it the config's counts are used
    #[arg(long, value_name = "F")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trajectory CSV or corpus directory
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub common: Common,
    /// gbdt-exact, gbdt-hist, svm or lstm
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Directory written by `dataset`
    #[arg(long, value_name = "DIR")]
    pub samples: Option<PathBuf>,
    /// Trajectory CSV or corpus directory, used when no sample directory is given
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model to time; all four when omitted
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Directory written by `dataset`
    #[arg(long, value_name = "DIR")]
    pub samples: Option<PathBuf>,
    /// Trajectory CSV or corpus directory, used when no sample directory is given
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Trees,
    Window,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Which sweep to run
    pub kind: SweepKind,
    #[command(flatten)]
    pub common: Common,
    /// Restrict a window sweep to one model
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Directory written by `dataset` (tree sweep)
    #[arg(long, value_name = "DIR")]
    pub samples: Option<PathBuf>,
    /// Trajectory CSV or corpus directory
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    /// Configuration errors from the library are validation failures,
    /// everything else happened at run time.
    pub fn from_core(e: lc_intent_core::Error) -> Failure {
        match e {
            lc_intent_core::Error::Config { .. } => Failure::validation(e.to_string()),
            _ => Failure::runtime(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<lc_intent_core::Error> for Failure {
    fn from(e: lc_intent_core::Error) -> Failure {
        Failure::from_core(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::runtime(format!("{e:#}"))
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
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Features(a) => commands::features(a),
        Command::Dataset(a) => commands::dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Crossval(a) => commands::crossval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
