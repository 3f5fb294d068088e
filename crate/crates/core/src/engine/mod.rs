//! Screening runs: who decided what, persisted in a resumable store.

mod human;
mod run;
mod store;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use human::{import_human_decisions, ImportFailure, ImportReport};
pub use run::{run_repeat_trial, run_screening, ProtocolIndex, RunOptions, RunReport, RunSummary};
pub use store::DecisionStore;

use crate::corpus::CorpusError;
use crate::gateway::{CompletionStatus, GatewayError};
use crate::protocol::{BiasLevel, Decision, ProtocolError};

/// Identifies one column of decisions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScreeningSource {
    Model {
        model_id: String,
        bias: BiasLevel,
        trial: u32,
    },
    Human {
        screener_id: String,
    },
}

impl ScreeningSource {
    pub fn model(model_id: &str, bias: BiasLevel, trial: u32) -> Self {
        ScreeningSource::Model {
            model_id: model_id.to_string(),
            bias,
            trial,
        }
    }

    pub fn human(screener_id: &str) -> Self {
        ScreeningSource::Human {
            screener_id: screener_id.to_string(),
        }
    }

    pub fn is_model(&self) -> bool {
        matches!(self, ScreeningSource::Model { .. })
    }

    /// Same model and prompt, different trial.
    pub fn with_trial(&self, trial: u32) -> Option<Self> {
        match self {
            ScreeningSource::Model { model_id, bias, .. } => {
                Some(Self::model(model_id, *bias, trial))
            }
            ScreeningSource::Human { .. } => None,
        }
    }
}

/// `model:<model_id>:<bias>:<trial>` or `human:<screener_id>`.
impl fmt::Display for ScreeningSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScreeningSource::Model {
                model_id,
                bias,
                trial,
            } => write!(f, "model:{model_id}:{bias}:{trial}"),
            ScreeningSource::Human { screener_id } => write!(f, "human:{screener_id}"),
        }
    }
}

impl FromStr for ScreeningSource {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EngineError::BadSource(s.to_string());
        if let Some(id) = s.strip_prefix("human:") {
            if id.is_empty() {
                return Err(bad());
            }
            return Ok(Self::human(id));
        }
        let rest = s.strip_prefix("model:").ok_or_else(bad)?;
        let mut parts = rest.rsplitn(3, ':');
        let trial = parts
            .next()
            .and_then(|t| t.parse::<u32>().ok())
            .ok_or_else(bad)?;
        let bias = parts
            .next()
            .and_then(|b| b.parse::<BiasLevel>().ok())
            .ok_or_else(bad)?;
        let model_id = parts.next().filter(|m| !m.is_empty()).ok_or_else(bad)?;
        if trial == 0 {
            return Err(bad());
        }
        Ok(Self::model(model_id, bias, trial))
    }
}

/// One binary verdict with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningDecision {
    pub record_id: String,
    pub source: ScreeningSource,
    pub verdict: Decision,
    pub raw_text: Option<String>,
    /// The verdict came from the include-on-failure policy.
    pub fallback: bool,
    pub attempts: u32,
    /// Model completion status; absent for human decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<CompletionStatus>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("malformed source {0:?}; expected model:<id>:<bias>:<trial> or human:<id>")]
    BadSource(String),
    #[error("duplicate decision for record {record_id} from {source_name}")]
    DuplicateDecision {
        record_id: String,
        source_name: String,
    },
    #[error("trial {trial} already exists for {source_name}")]
    DuplicateTrial { source_name: String, trial: u32 },
    #[error("no protocol for review {0}")]
    MissingProtocol(String),
    #[error("corrupt decision store at line {line}: {message}")]
    CorruptStore { line: usize, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
