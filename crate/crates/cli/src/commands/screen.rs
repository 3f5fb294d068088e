use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use screenkit::engine::{run_screening, DecisionStore, ProtocolIndex, RunOptions, RunReport};
use screenkit::gateway::{BackendFile, CacheMode, Gateway, ResponseCache};
use screenkit::protocol::PromptSet;
use screenkit::{BiasLevel, ReviewProtocol};
use serde::Serialize;

use super::{read_kept_records, usage};
use crate::manifest::{digest_files, ManifestBuilder};

#[derive(Debug, Args, Serialize)]
pub struct ScreenArgs {
    /// Corpus or subset file to screen.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Protocol JSON for each review in the corpus; repeat as needed.
    #[arg(long, required = true)]
    pub protocol: Vec<PathBuf>,
    /// Backend definitions (`{"backends": [...]}`).
    #[arg(long)]
    pub backend_config: PathBuf,
    /// Backend to use, by name (or model id) in the config file.
    #[arg(long)]
    pub model: String,
    /// Prompt family.
    #[arg(long)]
    pub bias: BiasLevel,
    /// live, replay or record-replay.
    #[arg(long, default_value = "live")]
    pub cache_mode: CacheMode,
    /// Response cache file; required unless the mode is live.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Decision store to append to; created if missing.
    #[arg(long)]
    pub store: PathBuf,
    /// Trial number, for repeat runs of the same model and prompt.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub trial: u32,
    /// Parallel requests; defaults to the backend's setting.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Prompt template file; defaults to the bundled templates.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ScreenSummary {
    cache_mode: CacheMode,
    transport_calls: u64,
    #[serde(flatten)]
    report: RunReport,
}

pub fn screen(args: &ScreenArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("screen", args);
    run.config_digest = Some(digest_files(std::slice::from_ref(&args.backend_config))?);
    run.corpus_digest = Some(digest_files(std::slice::from_ref(&args.corpus))?);

    let backends = BackendFile::from_json(
        &fs::read_to_string(&args.backend_config)
            .with_context(|| format!("reading {}", args.backend_config.display()))?,
    )
    .with_context(|| format!("backend config {}", args.backend_config.display()))?;
    let config = backends
        .find(&args.model)
        .ok()
        .or_else(|| backends.backends.iter().find(|b| b.model_id == args.model))
        .ok_or_else(|| {
            usage(format!(
                "no backend named {:?} in {}",
                args.model,
                args.backend_config.display()
            ))
        })?
        .clone();

    let prompts = match &args.prompts {
        Some(path) => {
            PromptSet::load(path).with_context(|| format!("prompt file {}", path.display()))?
        }
        None => PromptSet::canonical(),
    };
    run.prompt_file_digest = Some(prompts.checksum().to_string());
    let prompt = prompts.spec(args.bias, config.dialect());

    let mut protocols = ProtocolIndex::new();
    for path in &args.protocol {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let protocol = ReviewProtocol::from_json(&text)
            .with_context(|| format!("protocol {}", path.display()))?;
        protocols.insert(protocol.review_id.clone(), protocol);
    }
    let records = read_kept_records(std::slice::from_ref(&args.corpus))?;

    let cache = match (args.cache_mode, &args.cache) {
        (CacheMode::Live, Some(path)) => {
            log::warn!("--cache {} is ignored in live mode", path.display());
            None
        }
        (CacheMode::Live, None) => None,
        (mode, None) => return Err(usage(format!("--cache-mode {mode} needs --cache"))),
        (CacheMode::Replay, Some(path)) => Some(Arc::new(
            ResponseCache::open_read_only(path)
                .with_context(|| format!("cache {}", path.display()))?,
        )),
        (CacheMode::RecordReplay, Some(path)) => Some(Arc::new(
            ResponseCache::open(path).with_context(|| format!("cache {}", path.display()))?,
        )),
    };
    // Credentials are checked here, before anything is sent or written.
    let gateway = Gateway::http(config, args.cache_mode, cache)?;

    let mut store = DecisionStore::open(&args.store)
        .with_context(|| format!("opening decision store {}", args.store.display()))?;
    let options = RunOptions {
        concurrency: args.concurrency,
    };
    let report = run_screening(
        &records, &protocols, &prompt, &gateway, &mut store, args.trial, options,
    )?;
    eprintln!(
        "{}: {} new decisions, {} already present, {} included, {} via fallback",
        report.summary.source,
        report.newly_written,
        report.skipped,
        report.summary.included,
        report.summary.fallbacks
    );
    let summary = ScreenSummary {
        cache_mode: args.cache_mode,
        transport_calls: gateway.transport_calls(),
        report,
    };
    run.finish(&summary, manifest, Some(&args.store))
}
