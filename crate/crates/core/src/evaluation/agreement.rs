use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::protocol::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// `None` when chance agreement is 1 but the raters disagree somewhere,
    /// which cannot happen for binary raters; kept for completeness.
    pub kappa: Option<f64>,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n: usize,
}

/// Cohen's kappa between two binary raters over the same record set.
pub fn cohen_kappa(
    a: &HashMap<String, Decision>,
    b: &HashMap<String, Decision>,
) -> Result<AgreementReport, EvalError> {
    let only_a = a.keys().filter(|k| !b.contains_key(*k)).count();
    let only_b = b.keys().filter(|k| !a.contains_key(*k)).count();
    if only_a > 0 || only_b > 0 {
        return Err(EvalError::RecordSetMismatch { only_a, only_b });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }

    let n = a.len();
    let (mut agree, mut a_inc, mut b_inc) = (0usize, 0usize, 0usize);
    for (record_id, va) in a {
        let vb = b[record_id];
        agree += usize::from(*va == vb);
        a_inc += usize::from(va.is_include());
        b_inc += usize::from(vb.is_include());
    }
    let nf = n as f64;
    let po = agree as f64 / nf;
    let (pa, pb) = (a_inc as f64 / nf, b_inc as f64 / nf);
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    let kappa = if pe >= 1.0 {
        (po >= 1.0).then_some(1.0)
    } else {
        Some((po - pe) / (1.0 - pe))
    };
    Ok(AgreementReport {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
        n,
    })
}
