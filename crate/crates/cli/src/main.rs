use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] sswim_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sswim", version, about = "Sampled spiking networks for time-series forecasting")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory; overrides SSWIM_OUT and the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model per seed and write model, report and predictions.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's seed list.
        #[arg(long)]
        seed: Vec<u64>,
    },
    /// Compute the RSE of a saved model on one split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Sweep weight criteria, normalizers, kernels and widths.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Vec<u64>,
    },
    /// Dump per-layer parameter summaries as CSV.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let out = cli.out;
    match cli.command {
        Command::Train { config, seed } => commands::train(&config, &seed, out),
        Command::Eval { model, config, split } => commands::eval(&model, &config, &split),
        Command::Ablate { config, seed } => commands::ablate(&config, &seed, out),
        Command::Inspect { model } => commands::inspect(&model, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
