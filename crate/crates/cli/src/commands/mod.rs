mod human;
mod ingest;
mod report;
mod sample;
mod screen;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use screenkit::corpus::read_corpus;
use screenkit::engine::{DecisionStore, ScreeningSource};
use screenkit::Record;
use serde::Serialize;

pub use human::{import_human, ImportHumanArgs};
pub use ingest::{ingest, IngestArgs};
pub use report::{
    correlate, ensemble, evaluate, kappa, CorrelateArgs, EnsembleArgs, EvaluateArgs, KappaArgs,
};
pub use sample::{sample, SampleArgs};
pub use screen::{screen, ScreenArgs};

/// Bad flag combination detected after parsing. Exits with status 2, like
/// clap's own usage errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
    read_corpus(BufReader::new(file)).with_context(|| format!("reading corpus {}", path.display()))
}

/// Records that survived cleaning, from one or more corpus files.
fn read_kept_records(paths: &[PathBuf]) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    for path in paths {
        records.extend(read_records(path)?.into_iter().filter(Record::is_kept));
    }
    Ok(records)
}

fn load_store(path: &Path) -> Result<DecisionStore> {
    DecisionStore::load(path).with_context(|| format!("loading decision store {}", path.display()))
}

/// Resolve source selectors against the store.
///
/// A selector is either a full source name (`model:<id>:<bias>:<trial>`,
/// `human:<id>`) or a prefix ending in `*`. No selectors means every source
/// in the store.
fn select_sources(store: &DecisionStore, selectors: &[String]) -> Result<Vec<ScreeningSource>> {
    let available = store.sources();
    if selectors.is_empty() {
        return Ok(available);
    }
    let mut chosen = BTreeSet::new();
    for selector in selectors {
        if let Some(prefix) = selector.strip_suffix('*') {
            let before = chosen.len();
            chosen.extend(
                available
                    .iter()
                    .filter(|s| s.to_string().starts_with(prefix))
                    .cloned(),
            );
            if chosen.len() == before {
                log::warn!("selector {selector:?} matched no source");
            }
        } else {
            let source: ScreeningSource = selector.parse().map_err(|e| usage(format!("{e}")))?;
            chosen.insert(source);
        }
    }
    Ok(chosen.into_iter().collect())
}

/// Write to `out`, or stdout when absent.
fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json_lf<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
