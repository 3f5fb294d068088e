//! `screenkit` command-line front end.
//!
//! Each subcommand reads files and writes files: corpus → subset → decision
//! store → reports. Every run also writes a manifest describing its inputs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    CorrelateArgs, EnsembleArgs, EvaluateArgs, ImportHumanArgs, IngestArgs, KappaArgs, SampleArgs,
    ScreenArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "screenkit",
    version,
    about = "Abstract screening with LLM backends"
)]
struct Cli {
    /// Where to write the run manifest. Defaults to `<output>.manifest.json`,
    /// or stderr when the command has no output file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse RIS exports into a cleaned, labelled corpus.
    Ingest(IngestArgs),
    /// Draw the balanced evaluation subset from one or more corpora.
    Sample(SampleArgs),
    /// Screen a corpus with one model and prompt, appending to a decision store.
    Screen(ScreenArgs),
    /// Import one human screener's decisions from CSV.
    ImportHuman(ImportHumanArgs),
    /// Metrics per source, pooled or per review.
    Evaluate(EvaluateArgs),
    /// Metrics for series and parallel pairs of sources.
    Ensemble(EnsembleArgs),
    /// Cohen's kappa between sources or across repeat trials.
    Kappa(KappaArgs),
    /// Correlation of per-review metrics between two groups of sources.
    Correlate(CorrelateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => commands::ingest(args, cli.manifest.as_deref()),
        Command::Sample(args) => commands::sample(args, cli.manifest.as_deref()),
        Command::Screen(args) => commands::screen(args, cli.manifest.as_deref()),
        Command::ImportHuman(args) => commands::import_human(args, cli.manifest.as_deref()),
        Command::Evaluate(args) => commands::evaluate(args, cli.manifest.as_deref()),
        Command::Ensemble(args) => commands::ensemble(args, cli.manifest.as_deref()),
        Command::Kappa(args) => commands::kappa(args, cli.manifest.as_deref()),
        Command::Correlate(args) => commands::correlate(args, cli.manifest.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
