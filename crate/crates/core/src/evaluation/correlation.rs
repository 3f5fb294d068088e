use std::collections::BTreeMap;

use super::{EvalError, Metric, MetricsRow};

/// Pearson product-moment correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination of a one-predictor least-squares fit.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    pearson_r(xs, ys).map(|r| r * r)
}

/// Pair per-review metric values of two groups of sources.
///
/// For every review, each row accepted by `is_x` is paired with each row
/// accepted by `is_y`. Pooled rows and undefined metric values are skipped.
pub fn paired_metric_values<M, X, Y>(
    rows: &[MetricsRow],
    metric: M,
    is_x: X,
    is_y: Y,
) -> (Vec<f64>, Vec<f64>)
where
    M: Fn(&MetricsRow) -> Metric,
    X: Fn(&MetricsRow) -> bool,
    Y: Fn(&MetricsRow) -> bool,
{
    let mut by_review: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.review_id != super::POOLED_REVIEW) {
        let Some(value) = metric(row) else { continue };
        let entry = by_review.entry(row.review_id.as_str()).or_default();
        if is_x(row) {
            entry.0.push(value);
        }
        if is_y(row) {
            entry.1.push(value);
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x_values, y_values) in by_review.values() {
        for x in x_values {
            for y in y_values {
                xs.push(*x);
                ys.push(*y);
            }
        }
    }
    (xs, ys)
}
