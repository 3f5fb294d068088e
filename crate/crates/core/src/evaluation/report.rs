//! Metrics tables in CSV and JSON.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use super::{
    compute_metrics, round3, tabulate_confusion, ConfusionMatrix, EvalError, Metric, MetricsReport,
};
use crate::corpus::Record;
use crate::engine::{DecisionStore, ScreeningSource};

/// `review_id` used for rows pooled over all reviews.
pub const POOLED_REVIEW: &str = "all";

/// Ensemble configuration columns, present only in ensemble reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnsembleColumns {
    pub mode: String,
    pub component_a: String,
    pub component_b: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub ensemble: Option<EnsembleColumns>,
    pub source: String,
    pub review_id: String,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

impl MetricsRow {
    pub fn new(source: String, review_id: String, confusion: ConfusionMatrix) -> Self {
        Self {
            ensemble: None,
            source,
            review_id,
            metrics: compute_metrics(&confusion),
            confusion,
        }
    }
}

/// Metric formatted to 3 decimal places; `NA` when undefined.
pub fn format_metric(value: Metric) -> String {
    match value {
        Some(v) => format!("{:.3}", round3(v)),
        None => "NA".to_string(),
    }
}

const METRIC_COLUMNS: [&str; 13] = [
    "source",
    "review_id",
    "tp",
    "tn",
    "fp",
    "fn",
    "sensitivity",
    "specificity",
    "balanced_accuracy",
    "precision",
    "npv",
    "f1",
    "zero_positive_rule_applied",
];

/// CSV report. Ensemble rows get leading `mode,component_a,component_b`
/// columns when `ensemble_columns` is set.
pub fn write_metrics_csv<W: Write>(
    writer: W,
    rows: &[MetricsRow],
    ensemble_columns: bool,
) -> Result<(), EvalError> {
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if ensemble_columns {
        header.extend(["mode", "component_a", "component_b"]);
    }
    header.extend(METRIC_COLUMNS);
    csv.write_record(&header)?;

    for row in rows {
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        if ensemble_columns {
            let cols = row.ensemble.clone().unwrap_or(EnsembleColumns {
                mode: String::new(),
                component_a: String::new(),
                component_b: String::new(),
            });
            fields.extend([cols.mode, cols.component_a, cols.component_b]);
        }
        let cm = &row.confusion;
        let m = &row.metrics;
        fields.extend([
            row.source.clone(),
            row.review_id.clone(),
            cm.tp.to_string(),
            cm.tn.to_string(),
            cm.fp.to_string(),
            cm.fn_.to_string(),
            format_metric(m.sensitivity),
            format_metric(m.specificity),
            format_metric(m.balanced_accuracy),
            format_metric(m.precision),
            format_metric(m.npv),
            format_metric(m.f1),
            m.zero_positive_rule_applied.to_string(),
        ]);
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    ensemble: Option<&'a EnsembleColumns>,
    source: &'a str,
    review_id: &'a str,
    #[serde(flatten)]
    confusion: &'a ConfusionMatrix,
    sensitivity: Metric,
    specificity: Metric,
    balanced_accuracy: Metric,
    precision: Metric,
    npv: Metric,
    f1: Metric,
    zero_positive_rule_applied: bool,
}

/// JSON array report; undefined metrics are `null`. Values are rounded to
/// 3 decimal places like the CSV.
pub fn write_metrics_json<W: Write>(mut writer: W, rows: &[MetricsRow]) -> Result<(), EvalError> {
    let r = |m: Metric| m.map(round3);
    let json: Vec<JsonRow> = rows
        .iter()
        .map(|row| JsonRow {
            ensemble: row.ensemble.as_ref(),
            source: &row.source,
            review_id: &row.review_id,
            confusion: &row.confusion,
            sensitivity: r(row.metrics.sensitivity),
            specificity: r(row.metrics.specificity),
            balanced_accuracy: r(row.metrics.balanced_accuracy),
            precision: r(row.metrics.precision),
            npv: r(row.metrics.npv),
            f1: r(row.metrics.f1),
            zero_positive_rule_applied: row.metrics.zero_positive_rule_applied,
        })
        .collect();
    serde_json::to_writer_pretty(&mut writer, &json)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Group records by review in ascending `review_id` order.
pub(crate) fn by_review(records: &[Record]) -> BTreeMap<&str, Vec<Record>> {
    let mut groups: BTreeMap<&str, Vec<Record>> = BTreeMap::new();
    for record in records {
        groups
            .entry(record.review_id.as_str())
            .or_default()
            .push(record.clone());
    }
    groups
}

/// Confusion matrices and metrics for each source, pooled or per review.
pub fn evaluate_sources(
    store: &DecisionStore,
    records: &[Record],
    sources: &[ScreeningSource],
    per_review: bool,
) -> Result<Vec<MetricsRow>, EvalError> {
    let mut rows = Vec::new();
    for source in sources {
        let name = source.to_string();
        let decisions: HashMap<_, _> = store.decisions_for(source);
        if per_review {
            for (review_id, group) in by_review(records) {
                let cm = tabulate_confusion(&decisions, &group, &name)?;
                rows.push(MetricsRow::new(name.clone(), review_id.to_string(), cm));
            }
        } else {
            let cm = tabulate_confusion(&decisions, records, &name)?;
            rows.push(MetricsRow::new(name, POOLED_REVIEW.to_string(), cm));
        }
    }
    Ok(rows)
}
