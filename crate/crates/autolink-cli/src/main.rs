//! Operator entry points: index building, single-question linking,
//! end-to-end generation, and benchmark evaluation.

mod backends;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use autolink::config::{load_config, CliOverrides};
use autolink::Error;

#[derive(Parser)]
#[command(
    name = "autolink",
    version,
    about = "Agentic schema linking and SQL generation over relational catalogs"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, default_value = "autolink.toml")]
    config: PathBuf,
    /// Evaluation worker cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Global random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Linking-turn budget.
    #[arg(long, global = true)]
    max_turns: Option<usize>,
    /// Seed-schema size for initial retrieval.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Columns returned per retrieval action.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Self-consistency sample count.
    #[arg(long, global = true)]
    candidates: Option<usize>,
    /// Disable an action for the run; repeatable.
    #[arg(long, global = true, value_name = "ACTION")]
    ablate: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one vector index per configured catalog.
    Index {
        /// Rebuild even when an index is already current.
        #[arg(long)]
        force: bool,
    },
    /// Run one linking session; write its transcript and linked schema.
    Link {
        /// Database id from the configured catalogs.
        #[arg(long)]
        db: String,
        /// Natural-language question.
        #[arg(long)]
        question: String,
    },
    /// Link, then sample, correct, and vote; print the final SQL.
    Generate {
        /// Database id from the configured catalogs.
        #[arg(long)]
        db: String,
        /// Natural-language question.
        #[arg(long)]
        question: String,
    },
    /// Evaluate benchmark cases; write JSON and text reports.
    Eval {
        /// Benchmark cases as JSON lines.
        #[arg(long)]
        benchmark: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = CliOverrides {
        jobs: cli.jobs,
        seed: cli.seed,
        max_turns: cli.max_turns,
        n: cli.n,
        m: cli.m,
        candidates: cli.candidates,
        ablate: cli.ablate.clone(),
    };
    let config = match load_config(&cli.config, &overrides) {
        Ok(config) => config,
        Err(error) => {
            eprintln!("error: {error}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Index { force } => commands::cmd_index(&config, *force),
        Command::Link { db, question } => commands::cmd_link(&config, db, question),
        Command::Generate { db, question } => commands::cmd_generate(&config, db, question),
        Command::Eval { benchmark } => commands::cmd_eval(&config, benchmark),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            match error {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
