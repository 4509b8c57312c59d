//! `rate`: technology extraction and network analytics for bibliographic
//! corpora.
//!
//! The pipeline turns a corpus of paper records into per-paper technology
//! term lists and a weighted co-occurrence network, in resumable stages:
//!
//! ```text
//! ingest -> build-kb -> extract -> ground -> validate -> finalize
//!                                             -> evaluate (optional)
//!                                             -> network
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing prerequisite
//! artifact, 4 model provider failure, 1 anything else.

mod artifacts;
mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rate", version, about = "Technology term extraction pipeline")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(short, long, global = true, default_value = "rate.toml")]
    config: PathBuf,

    /// Recompute outputs even when stage artifacts already exist.
    #[arg(long, global = true)]
    force: bool,

    /// Answer every model call from the response cache; error on misses.
    #[arg(long, global = true)]
    offline: bool,

    /// Ingest only the first N corpus records.
    #[arg(long, global = true, value_name = "N")]
    limit: Option<usize>,

    /// Override the community detection seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus into normalized per-paper documents.
    Ingest,
    /// Chunk, embed, and index the technology catalog.
    BuildKb,
    /// Extract candidate technology phrases with retrieval context.
    Extract,
    /// Check each candidate against its source document.
    Ground,
    /// Obtain a definitional verdict for every grounded candidate.
    Validate,
    /// Clean, deduplicate, and sort the surviving terms.
    Finalize,
    /// Score the final terms against a gold standard.
    Evaluate,
    /// Build, analyze, and export the co-occurrence network.
    Network,
    /// Run every stage in order.
    All,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), stages::CliError> {
    let config = config::load(&cli.config)?;
    let pipeline = stages::Pipeline::new(config, cli.force, cli.offline, cli.limit, cli.seed);
    match cli.command {
        Command::Ingest => pipeline.ingest(),
        Command::BuildKb => pipeline.build_kb(),
        Command::Extract => pipeline.extract(),
        Command::Ground => pipeline.ground(),
        Command::Validate => pipeline.validate(),
        Command::Finalize => pipeline.finalize(),
        Command::Evaluate => pipeline.evaluate(),
        Command::Network => pipeline.network(),
        Command::All => pipeline.all(),
    }
}
