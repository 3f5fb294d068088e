//! Model screening runs with resume-by-skip.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::Serialize;

use super::{DecisionStore, EngineError, ScreeningDecision, ScreeningSource};
use crate::corpus::Record;
use crate::gateway::{apply_include_fallback, CompletionStatus, Gateway, GatewayError};
use crate::protocol::{render_prompt, Decision, PromptSpec, ReviewProtocol};

/// Protocols keyed by review id.
pub type ProtocolIndex = HashMap<String, ReviewProtocol>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the backend's configured concurrency.
    pub concurrency: Option<usize>,
}

/// Decision counts for one source over a record set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub source: String,
    pub records: usize,
    pub included: usize,
    pub excluded: usize,
    pub fallbacks: usize,
    /// Decisions whose completion status was not Ok.
    pub errors: usize,
}

impl RunSummary {
    pub fn of(store: &DecisionStore, source: &ScreeningSource, records: &[Record]) -> Self {
        let mut summary = RunSummary {
            source: source.to_string(),
            records: records.len(),
            included: 0,
            excluded: 0,
            fallbacks: 0,
            errors: 0,
        };
        for record in records {
            let Some(d) = store.get(source, &record.record_id) else {
                continue;
            };
            match d.verdict {
                Decision::Include => summary.included += 1,
                Decision::Exclude => summary.excluded += 1,
            }
            summary.fallbacks += usize::from(d.fallback);
            summary.errors += usize::from(d.status.is_some_and(|s| s != CompletionStatus::Ok));
        }
        summary
    }

    pub fn decided(&self) -> usize {
        self.included + self.excluded
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub summary: RunSummary,
    /// Decisions written by this invocation.
    pub newly_written: usize,
    /// Records already decided before this invocation.
    pub skipped: usize,
}

/// Screen every record not yet decided by this (model, bias, trial) source.
///
/// Prompts are rendered for all pending records before any request is sent.
/// Decisions are appended to the store in input order; on error the run stops
/// dispatching, persists every decision already obtained and returns the error.
pub fn run_screening(
    records: &[Record],
    protocols: &ProtocolIndex,
    prompt: &PromptSpec,
    gateway: &Gateway,
    store: &mut DecisionStore,
    trial: u32,
    options: RunOptions,
) -> Result<RunReport, EngineError> {
    let source = ScreeningSource::model(&gateway.config().model_id, prompt.bias(), trial.max(1));

    let mut pending = Vec::new();
    let mut skipped = 0;
    let mut seen = HashSet::new();
    for record in records {
        if !seen.insert(record.record_id.as_str()) {
            continue;
        }
        if store.contains(&source, &record.record_id) {
            skipped += 1;
            continue;
        }
        let protocol = protocols
            .get(&record.review_id)
            .ok_or_else(|| EngineError::MissingProtocol(record.review_id.clone()))?;
        pending.push((record, render_prompt(prompt, protocol, record)?));
    }

    let workers = options
        .concurrency
        .unwrap_or(gateway.config().concurrency)
        .clamp(1, pending.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut written = 0;
    let mut first_error: Option<EngineError> = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<ScreeningDecision, GatewayError>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, abort, source) = (&pending, &next, &abort, &source);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((record, text)) = pending.get(i) else {
                    break;
                };
                let result = gateway.complete(text).map(|outcome| {
                    let (verdict, fallback) = apply_include_fallback(&outcome);
                    ScreeningDecision {
                        record_id: record.record_id.clone(),
                        source: source.clone(),
                        verdict,
                        raw_text: outcome.raw_text,
                        fallback,
                        attempts: outcome.attempts,
                        status: Some(outcome.status),
                        created_at: outcome.completed_at,
                    }
                });
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffered: BTreeMap<usize, ScreeningDecision> = BTreeMap::new();
        let mut next_write = 0;
        for (i, result) in rx {
            match result {
                Ok(decision) => {
                    buffered.insert(i, decision);
                }
                Err(err) => {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(err.into());
                }
            }
            while let Some(decision) = buffered.remove(&next_write) {
                next_write += 1;
                match store.append(decision) {
                    Ok(()) => written += 1,
                    Err(err) => {
                        abort.store(true, Ordering::SeqCst);
                        first_error.get_or_insert(err);
                    }
                }
            }
        }
        // Completions past a failed slot, still in input order.
        for (_, decision) in std::mem::take(&mut buffered) {
            if store.append(decision).is_ok() {
                written += 1;
            }
        }
    });

    if let Some(err) = first_error {
        log::error!("{source}: run stopped after {written} new decisions: {err}");
        return Err(err);
    }
    Ok(RunReport {
        summary: RunSummary::of(store, &source, records),
        newly_written: written,
        skipped,
    })
}

/// Screen the record set again as a new, independent trial.
///
/// Fails with [`EngineError::DuplicateTrial`] if the store already holds any
/// decision for this (model, bias, trial).
pub fn run_repeat_trial(
    records: &[Record],
    protocols: &ProtocolIndex,
    prompt: &PromptSpec,
    gateway: &Gateway,
    store: &mut DecisionStore,
    trial: u32,
    options: RunOptions,
) -> Result<RunReport, EngineError> {
    let source = ScreeningSource::model(&gateway.config().model_id, prompt.bias(), trial.max(1));
    if store.decisions().iter().any(|d| d.source == source) {
        return Err(EngineError::DuplicateTrial {
            source_name: source.to_string(),
            trial,
        });
    }
    run_screening(records, protocols, prompt, gateway, store, trial, options)
}
