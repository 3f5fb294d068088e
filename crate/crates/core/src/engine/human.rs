//! Import of human screening decisions from `record_id,verdict` CSV.

use std::collections::HashSet;
use std::io::Read;

use chrono::{DateTime, Utc};

use super::{DecisionStore, EngineError, ScreeningDecision, ScreeningSource};
use crate::protocol::Decision;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportFailure {
    UnknownRecord { line: u64, record_id: String },
    MalformedVerdict { line: u64, value: String },
    Duplicate { line: u64, record_id: String },
}

impl std::fmt::Display for ImportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImportFailure::UnknownRecord { line, record_id } => {
                write!(f, "line {line}: unknown record {record_id:?}")
            }
            ImportFailure::MalformedVerdict { line, value } => {
                write!(
                    f,
                    "line {line}: verdict {value:?} is neither include nor exclude"
                )
            }
            ImportFailure::Duplicate { line, record_id } => {
                write!(
                    f,
                    "line {line}: record {record_id:?} already decided by this screener"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub imported: usize,
    pub failures: Vec<ImportFailure>,
}

fn parse_decision(value: &str) -> Option<Decision> {
    match value.trim().to_ascii_lowercase().as_str() {
        "include" => Some(Decision::Include),
        "exclude" => Some(Decision::Exclude),
        _ => None,
    }
}

/// Store one screener's decisions under `human:<screener_id>`.
///
/// Rows with unknown record ids or unreadable verdicts are reported by line
/// number and skipped; the rest are imported.
pub fn import_human_decisions<R: Read>(
    csv: R,
    screener_id: &str,
    known_records: &HashSet<String>,
    store: &mut DecisionStore,
    created_at: DateTime<Utc>,
) -> Result<ImportReport, EngineError> {
    let source = ScreeningSource::human(screener_id);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
    };
    let (Some(id_col), Some(verdict_col)) = (column("record_id"), column("verdict")) else {
        return Err(EngineError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "human decisions CSV needs a record_id,verdict header",
        ))));
    };

    let mut report = ImportReport::default();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let record_id = row.get(id_col).unwrap_or_default().to_string();
        let raw_verdict = row.get(verdict_col).unwrap_or_default();
        if !known_records.contains(&record_id) {
            report
                .failures
                .push(ImportFailure::UnknownRecord { line, record_id });
            continue;
        }
        let Some(verdict) = parse_decision(raw_verdict) else {
            report.failures.push(ImportFailure::MalformedVerdict {
                line,
                value: raw_verdict.to_string(),
            });
            continue;
        };
        if store.contains(&source, &record_id) {
            report
                .failures
                .push(ImportFailure::Duplicate { line, record_id });
            continue;
        }
        store.append(ScreeningDecision {
            record_id,
            source: source.clone(),
            verdict,
            raw_text: Some(raw_verdict.to_string()),
            fallback: false,
            attempts: 1,
            status: None,
            created_at,
        })?;
        report.imported += 1;
    }
    for failure in &report.failures {
        log::warn!("{source}: {failure}");
    }
    Ok(report)
}
