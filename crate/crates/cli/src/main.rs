mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{AdvisorConfig, CommonArgs};

/// Bitmap join index advisor for evolving star-schema workloads.
#[derive(Debug, Parser)]
#[command(name = "dynidx", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Log progress (-v) or mining details (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create an empty knowledge base and configuration state.
    Init {
        /// Overwrite existing state.
        #[arg(long)]
        force: bool,
    },
    /// Ingest a workload log, re-mine and recommend an index configuration.
    Recommend {
        workload: PathBuf,
        /// File of transaction ids to forget, one per line.
        #[arg(long)]
        removed: Option<PathBuf>,
    },
    /// Append per-cycle measurements to <out>/evaluation.csv.
    Evaluate,
    /// Summarize the knowledge base and the current configuration.
    Status,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let outcome = AdvisorConfig::resolve(&cli.common).map_err(Failure::Input).and_then(|config| match &cli.command {
        Command::Init { force } => commands::init(&config, *force),
        Command::Recommend { workload, removed } => commands::recommend(&config, workload, removed.as_deref()),
        Command::Evaluate => commands::evaluate(&config),
        Command::Status => commands::status(&config),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
