use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::Args;
use screenkit::engine::{import_human_decisions, DecisionStore, ImportReport};
use serde::Serialize;

use super::read_kept_records;
use crate::manifest::{digest_files, ManifestBuilder};

#[derive(Debug, Args, Serialize)]
pub struct ImportHumanArgs {
    /// Corpus the decisions refer to.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Screener identifier; decisions are stored as `human:<id>`.
    #[arg(long)]
    pub screener: String,
    /// CSV with a `record_id,verdict` header.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Decision store to append to; created if missing.
    #[arg(long)]
    pub store: PathBuf,
    /// Timestamp recorded on each decision; defaults to now.
    #[arg(long)]
    pub created_at: Option<DateTime<Utc>>,
    /// Import the valid rows even if some rows are rejected.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Serialize)]
struct ImportSummary {
    source: String,
    imported: usize,
    rejected: Vec<String>,
}

pub fn import_human(args: &ImportHumanArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("import-human", args);
    run.corpus_digest = Some(digest_files(&[
        args.corpus.clone(),
        args.decisions.clone(),
    ])?);

    let known: HashSet<String> = read_kept_records(std::slice::from_ref(&args.corpus))?
        .into_iter()
        .map(|r| r.record_id)
        .collect();
    let csv = fs::read(&args.decisions)
        .with_context(|| format!("reading {}", args.decisions.display()))?;
    let created_at = args.created_at.unwrap_or_else(Utc::now);

    // Validate against an in-memory copy first so a rejected file leaves the
    // store untouched.
    let mut probe = if args.store.exists() {
        DecisionStore::load(&args.store)?
    } else {
        DecisionStore::in_memory()
    };
    let dry = import_human_decisions(
        csv.as_slice(),
        &args.screener,
        &known,
        &mut probe,
        created_at,
    )?;
    if !dry.failures.is_empty() && !args.lenient {
        for failure in &dry.failures {
            eprintln!("{}: {failure}", args.decisions.display());
        }
        bail!(
            "{} row(s) rejected; nothing imported (use --lenient to import the rest)",
            dry.failures.len()
        );
    }

    let mut store = DecisionStore::open(&args.store)
        .with_context(|| format!("opening decision store {}", args.store.display()))?;
    let ImportReport { imported, failures } = import_human_decisions(
        csv.as_slice(),
        &args.screener,
        &known,
        &mut store,
        created_at,
    )?;
    eprintln!(
        "human:{}: {imported} decisions imported, {} rejected",
        args.screener,
        failures.len()
    );
    let summary = ImportSummary {
        source: format!("human:{}", args.screener),
        imported,
        rejected: failures.iter().map(ToString::to_string).collect(),
    };
    run.finish(&summary, manifest, Some(&args.store))
}
