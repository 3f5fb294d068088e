//! Screening performance and agreement statistics.

mod agreement;
mod correlation;
mod metrics;
mod report;

use thiserror::Error;

pub use agreement::{cohen_kappa, AgreementReport};
pub use correlation::{paired_metric_values, pearson_r, r_squared};
pub use metrics::{
    compute_metrics, round3, tabulate_confusion, ConfusionMatrix, Metric, MetricsReport,
};
pub use report::{
    evaluate_sources, format_metric, write_metrics_csv, write_metrics_json, EnsembleColumns,
    MetricsRow, POOLED_REVIEW,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record {record_id} has no decision from {source_name}")]
    MissingDecision {
        record_id: String,
        source_name: String,
    },
    #[error("record {record_id} has no ground-truth label")]
    Unlabelled { record_id: String },
    #[error("the two sources decided different record sets ({only_a} only in the first, {only_b} only in the second)")]
    RecordSetMismatch { only_a: usize, only_b: usize },
    #[error("no records to compare")]
    Empty,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two points are needed, got {0}")]
    TooFewPoints(usize),
    #[error("one variable has zero variance")]
    DegenerateVariance,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
