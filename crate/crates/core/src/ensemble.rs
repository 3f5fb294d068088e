//! Pairwise ensembles of screeners.
//!
//! A series ensemble includes a record only when both components include it
//! (AND); a parallel ensemble includes it when either does (OR). Ensembles are
//! combined per record and then tabulated like any other screener.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Record;
use crate::engine::{DecisionStore, ScreeningSource};
use crate::evaluation::{
    compute_metrics, tabulate_confusion, ConfusionMatrix, EnsembleColumns, EvalError,
    MetricsReport, MetricsRow,
};
use crate::protocol::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    Series,
    Parallel,
}

impl EnsembleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleMode::Series => "series",
            EnsembleMode::Parallel => "parallel",
        }
    }
}

impl fmt::Display for EnsembleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleMode {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "series" | "and" => Ok(EnsembleMode::Series),
            "parallel" | "or" => Ok(EnsembleMode::Parallel),
            other => Err(EnsembleError::UnknownMode(other.to_string())),
        }
    }
}

/// Which kinds of screener an ensemble pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigClass {
    LlmLlm,
    LlmHuman,
    HumanHuman,
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("an ensemble needs two different components, got {0} twice")]
    SameComponent(String),
    #[error("unknown ensemble mode {0:?}; expected series or parallel")]
    UnknownMode(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Combine two verdicts.
pub fn combine_pair(a: Decision, b: Decision, mode: EnsembleMode) -> Decision {
    let include = match mode {
        EnsembleMode::Series => a.is_include() && b.is_include(),
        EnsembleMode::Parallel => a.is_include() || b.is_include(),
    };
    if include {
        Decision::Include
    } else {
        Decision::Exclude
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnsembleConfig {
    mode: EnsembleMode,
    component_a: ScreeningSource,
    component_b: ScreeningSource,
}

impl EnsembleConfig {
    pub fn new(
        mode: EnsembleMode,
        component_a: ScreeningSource,
        component_b: ScreeningSource,
    ) -> Result<Self, EnsembleError> {
        if component_a == component_b {
            return Err(EnsembleError::SameComponent(component_a.to_string()));
        }
        Ok(Self {
            mode,
            component_a,
            component_b,
        })
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn component_a(&self) -> &ScreeningSource {
        &self.component_a
    }

    pub fn component_b(&self) -> &ScreeningSource {
        &self.component_b
    }

    pub fn class(&self) -> ConfigClass {
        match (self.component_a.is_model(), self.component_b.is_model()) {
            (true, true) => ConfigClass::LlmLlm,
            (false, false) => ConfigClass::HumanHuman,
            _ => ConfigClass::LlmHuman,
        }
    }

    /// Report label, e.g. `parallel(model:gpt:heavy:1,human:bravo)`.
    pub fn name(&self) -> String {
        format!("{}({},{})", self.mode, self.component_a, self.component_b)
    }

    fn sort_key(&self) -> (EnsembleMode, String, String) {
        (
            self.mode,
            self.component_a.to_string(),
            self.component_b.to_string(),
        )
    }
}

/// Every unordered pair of distinct sources, in each requested mode.
pub fn all_pairs(sources: &[ScreeningSource], modes: &[EnsembleMode]) -> Vec<EnsembleConfig> {
    let mut unique: Vec<&ScreeningSource> = Vec::new();
    for source in sources {
        if !unique.contains(&source) {
            unique.push(source);
        }
    }
    let mut configs = Vec::new();
    for mode in modes {
        for (i, a) in unique.iter().enumerate() {
            for b in &unique[i + 1..] {
                configs.push(EnsembleConfig {
                    mode: *mode,
                    component_a: (*a).clone(),
                    component_b: (*b).clone(),
                });
            }
        }
    }
    configs
}

/// Combine two decision columns record by record. Records missing from either
/// column are omitted.
pub fn combine_columns(
    a: &HashMap<String, Decision>,
    b: &HashMap<String, Decision>,
    mode: EnsembleMode,
) -> HashMap<String, Decision> {
    a.iter()
        .filter_map(|(id, va)| {
            b.get(id)
                .map(|vb| (id.clone(), combine_pair(*va, *vb, mode)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

impl EnsembleResult {
    pub fn to_row(&self, review_id: &str) -> MetricsRow {
        MetricsRow {
            ensemble: Some(EnsembleColumns {
                mode: self.config.mode.to_string(),
                component_a: self.config.component_a.to_string(),
                component_b: self.config.component_b.to_string(),
            }),
            source: self.config.name(),
            review_id: review_id.to_string(),
            confusion: self.confusion,
            metrics: self.metrics,
        }
    }
}

/// Evaluate each configuration over `records`.
///
/// Both components must have decided every record. Results are sorted by
/// (mode, component_a, component_b) with series before parallel.
pub fn evaluate_ensembles(
    store: &DecisionStore,
    records: &[Record],
    configs: &[EnsembleConfig],
) -> Result<Vec<EnsembleResult>, EnsembleError> {
    let ids: HashSet<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
    let mut results = Vec::with_capacity(configs.len());
    for config in configs {
        let a = store.decisions_for_records(&config.component_a, &ids);
        let b = store.decisions_for_records(&config.component_b, &ids);
        // Surface the incomplete component by name.
        tabulate_confusion(&a, records, &config.component_a.to_string())?;
        tabulate_confusion(&b, records, &config.component_b.to_string())?;
        let combined = combine_columns(&a, &b, config.mode);
        let confusion = tabulate_confusion(&combined, records, &config.name())?;
        results.push(EnsembleResult {
            config: config.clone(),
            metrics: compute_metrics(&confusion),
            confusion,
        });
    }
    results.sort_by_key(|r| r.config.sort_key());
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::BiasLevel;
    use Decision::{Exclude as E, Include as I};

    #[test]
    fn truth_tables() {
        assert_eq!(combine_pair(I, E, EnsembleMode::Parallel), I);
        assert_eq!(combine_pair(I, E, EnsembleMode::Series), E);
        assert_eq!(combine_pair(E, E, EnsembleMode::Parallel), E);
        assert_eq!(combine_pair(I, I, EnsembleMode::Series), I);
    }

    #[test]
    fn commutative_and_dual() {
        for a in [I, E] {
            for b in [I, E] {
                for mode in [EnsembleMode::Series, EnsembleMode::Parallel] {
                    assert_eq!(combine_pair(a, b, mode), combine_pair(b, a, mode));
                }
                let dual = combine_pair(a.complement(), b.complement(), EnsembleMode::Parallel)
                    .complement();
                assert_eq!(combine_pair(a, b, EnsembleMode::Series), dual);
            }
        }
    }

    #[test]
    fn self_pairing_is_rejected() {
        let gpt = ScreeningSource::model("gpt", BiasLevel::Heavy, 1);
        assert!(matches!(
            EnsembleConfig::new(EnsembleMode::Parallel, gpt.clone(), gpt),
            Err(EnsembleError::SameComponent(_))
        ));
    }

    #[test]
    fn classes() {
        let gpt = ScreeningSource::model("gpt", BiasLevel::Heavy, 1);
        let sonnet = ScreeningSource::model("sonnet", BiasLevel::None, 1);
        let bravo = ScreeningSource::human("bravo");
        let alpha = ScreeningSource::human("alpha");
        let class = |a: &ScreeningSource, b: &ScreeningSource| {
            EnsembleConfig::new(EnsembleMode::Series, a.clone(), b.clone())
                .unwrap()
                .class()
        };
        assert_eq!(class(&gpt, &sonnet), ConfigClass::LlmLlm);
        assert_eq!(class(&bravo, &gpt), ConfigClass::LlmHuman);
        assert_eq!(class(&alpha, &bravo), ConfigClass::HumanHuman);
    }

    #[test]
    fn pair_enumeration() {
        let sources = vec![
            ScreeningSource::human("a"),
            ScreeningSource::human("b"),
            ScreeningSource::human("c"),
            ScreeningSource::human("a"),
        ];
        let configs = all_pairs(&sources, &[EnsembleMode::Series, EnsembleMode::Parallel]);
        assert_eq!(configs.len(), 6);
        assert_eq!(
            configs
                .iter()
                .filter(|c| c.mode() == EnsembleMode::Series)
                .count(),
            3
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "Series".parse::<EnsembleMode>().unwrap(),
            EnsembleMode::Series
        );
        assert_eq!(
            "or".parse::<EnsembleMode>().unwrap(),
            EnsembleMode::Parallel
        );
        assert!("xor".parse::<EnsembleMode>().is_err());
    }
}
