use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{GroundTruth, Record};
use crate::protocol::Decision;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn record(&mut self, decision: Decision, truth: GroundTruth) {
        match (decision, truth) {
            (Decision::Include, GroundTruth::IncludedInReview) => self.tp += 1,
            (Decision::Exclude, GroundTruth::ExcludedFromReview) => self.tn += 1,
            (Decision::Include, GroundTruth::ExcludedFromReview) => self.fp += 1,
            (Decision::Exclude, GroundTruth::IncludedInReview) => self.fn_ += 1,
            (_, GroundTruth::Unlabelled) => {}
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

/// Tally one source's decisions over an evaluation set.
///
/// Every record must carry a ground-truth label and a decision.
pub fn tabulate_confusion(
    decisions: &HashMap<String, Decision>,
    records: &[Record],
    source_name: &str,
) -> Result<ConfusionMatrix, EvalError> {
    let mut cm = ConfusionMatrix::default();
    for record in records {
        if record.ground_truth == GroundTruth::Unlabelled {
            return Err(EvalError::Unlabelled {
                record_id: record.record_id.clone(),
            });
        }
        let decision =
            decisions
                .get(&record.record_id)
                .ok_or_else(|| EvalError::MissingDecision {
                    record_id: record.record_id.clone(),
                    source_name: source_name.to_string(),
                })?;
        cm.record(*decision, record.ground_truth);
    }
    Ok(cm)
}

/// A rate, or `None` when its denominator is zero.
pub type Metric = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Metric,
    pub specificity: Metric,
    pub balanced_accuracy: Metric,
    pub precision: Metric,
    pub npv: Metric,
    pub f1: Metric,
    /// Sensitivity was set to 1 because there were no positives.
    pub zero_positive_rule_applied: bool,
}

fn ratio(num: u64, den: u64) -> Metric {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Sensitivity, specificity, balanced accuracy, precision, NPV and F1.
///
/// With no positives, sensitivity is taken as 1 and the rule flag is set;
/// every other zero-denominator metric is `None`.
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let zero_positive = cm.positives() == 0;
    let sensitivity = if zero_positive {
        Some(1.0)
    } else {
        ratio(cm.tp, cm.positives())
    };
    let specificity = ratio(cm.tn, cm.negatives());
    let balanced_accuracy = match (sensitivity, specificity) {
        (Some(s), Some(p)) => Some((s + p) / 2.0),
        _ => None,
    };
    MetricsReport {
        sensitivity,
        specificity,
        balanced_accuracy,
        precision: ratio(cm.tp, cm.tp + cm.fp),
        npv: ratio(cm.tn, cm.tn + cm.fn_),
        f1: ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
        zero_positive_rule_applied: zero_positive,
    }
}

/// Round to 3 decimal places, ties away from zero.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
