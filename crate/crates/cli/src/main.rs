//! stormloss: hurricane replacement-cost modeling over ZCTA-level data.
//!
//! Exit codes: 0 success, 1 internal error, 2 user/config/schema error.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stormloss::Seed;

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad input data, bad usage: exit 2.
    User(String),
    /// A failure inside the pipeline itself: exit 1.
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }

    pub fn internal(err: impl fmt::Display) -> Self {
        CliError::Internal(err.to_string())
    }

    /// Library errors raised while handling user-supplied data are the
    /// user's to fix.
    pub fn from_input(err: stormloss::Error) -> Self {
        CliError::User(err.to_string())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::User(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "stormloss", version, about)]
struct Cli {
    /// Path to the run-configuration JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap internal parallelism; output is thread-count-invariant.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the six synthetic source CSVs plus a manifest.
    Synth,
    /// Fit the configured model; write model.json, features.csv,
    /// training_predictions.csv.
    Train,
    /// Run the configured evaluation protocol; write report.json and a
    /// text table.
    Evaluate,
    /// Predict with a stored model on a feature-matrix CSV.
    Predict {
        /// Model document written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Feature-matrix CSV, as written by `train`.
        #[arg(long)]
        rows: PathBuf,
    },
    /// Export gain-based feature importance of a stored tree-ensemble model.
    Importance {
        #[arg(long)]
        model: PathBuf,
    },
    /// Export the per-ZCTA summary CSV (optionally with predictions).
    Report {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::user("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::internal)?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::user("--config PATH is required"))?;
    let config = RunConfig::load(config_path)?;
    let seed = Seed(cli.seed.unwrap_or(config.seed));
    let out_dir = cli.out.clone().unwrap_or_else(|| config.out_dir.clone());

    match &cli.command {
        Command::Synth => commands::cmd_synth(&config, seed, &out_dir),
        Command::Train => commands::cmd_train(&config, seed, &out_dir),
        Command::Evaluate => commands::cmd_evaluate(&config, seed, &out_dir),
        Command::Predict { model, rows } => {
            commands::cmd_predict(&config, model, rows, &out_dir)
        }
        Command::Importance { model } => commands::cmd_importance(&config, model, &out_dir),
        Command::Report { model } => commands::cmd_report(&config, seed, model.as_ref(), &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
