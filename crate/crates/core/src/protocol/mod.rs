//! Review criteria, bias-ladder prompts and model verdicts.

mod prompt;
mod verdict;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{render_prompt, Dialect, PromptSet, PromptSpec, CANONICAL_PROMPTS};
pub use verdict::parse_verdict;

/// A review's title and numbered criteria. Criteria are numbered by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewProtocol {
    pub review_id: String,
    pub review_title: String,
    pub inclusion_criteria: Vec<String>,
    #[serde(default)]
    pub exclusion_criteria: Vec<String>,
    pub search_year: i32,
}

impl ReviewProtocol {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.review_id.trim().is_empty() {
            return Err(ProtocolError::InvalidProtocol("empty review_id".into()));
        }
        if self.inclusion_criteria.is_empty() {
            return Err(ProtocolError::InvalidProtocol(format!(
                "review {} has no inclusion criteria",
                self.review_id
            )));
        }
        let blank = self
            .inclusion_criteria
            .iter()
            .chain(&self.exclusion_criteria)
            .any(|c| c.trim().is_empty());
        if blank {
            return Err(ProtocolError::InvalidProtocol(format!(
                "review {} has a blank criterion",
                self.review_id
            )));
        }
        Ok(())
    }

    /// Parse and validate a protocol JSON document.
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let protocol: Self = serde_json::from_str(text)
            .map_err(|e| ProtocolError::InvalidProtocol(e.to_string()))?;
        protocol.validate()?;
        Ok(protocol)
    }
}

/// Prompt family, ordered by how hard the wording pushes towards inclusion.
/// `TitleOnly` is the control prompt that withholds the abstract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasLevel {
    TitleOnly,
    None,
    Mild,
    Moderate,
    Heavy,
    Extreme,
}

impl BiasLevel {
    pub const ALL: [BiasLevel; 6] = [
        BiasLevel::TitleOnly,
        BiasLevel::None,
        BiasLevel::Mild,
        BiasLevel::Moderate,
        BiasLevel::Heavy,
        BiasLevel::Extreme,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasLevel::TitleOnly => "title_only",
            BiasLevel::None => "none",
            BiasLevel::Mild => "mild",
            BiasLevel::Moderate => "moderate",
            BiasLevel::Heavy => "heavy",
            BiasLevel::Extreme => "extreme",
        }
    }
}

impl fmt::Display for BiasLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasLevel {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        BiasLevel::ALL
            .into_iter()
            .find(|b| b.as_str() == norm || (norm == "titleonly" && *b == BiasLevel::TitleOnly))
            .ok_or_else(|| ProtocolError::UnknownBias(s.to_string()))
    }
}

/// Parsed model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Include,
    Exclude,
    Uninterpretable,
}

impl Verdict {
    pub fn decision(self) -> Option<Decision> {
        match self {
            Verdict::Include => Some(Decision::Include),
            Verdict::Exclude => Some(Decision::Exclude),
            Verdict::Uninterpretable => None,
        }
    }
}

/// A binary screening decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Include,
    Exclude,
}

impl Decision {
    pub fn is_include(self) -> bool {
        self == Decision::Include
    }

    pub fn complement(self) -> Self {
        match self {
            Decision::Include => Decision::Exclude,
            Decision::Exclude => Decision::Include,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Include => "include",
            Decision::Exclude => "exclude",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("record {record_id} has no abstract; only the title-only prompt can screen it")]
    MissingAbstract { record_id: String },
    #[error("record {record_id} has an empty title")]
    MissingTitle { record_id: String },
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid {bias} template: {message}")]
    InvalidTemplate { bias: BiasLevel, message: String },
    #[error("prompt file: {0}")]
    PromptFile(String),
    #[error("unknown bias level {0:?}")]
    UnknownBias(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_levels_are_totally_ordered() {
        let mut sorted = BiasLevel::ALL;
        sorted.sort();
        assert_eq!(sorted, BiasLevel::ALL);
        assert!(BiasLevel::TitleOnly < BiasLevel::None);
        assert!(BiasLevel::Heavy < BiasLevel::Extreme);
    }

    #[test]
    fn bias_level_parsing() {
        for b in BiasLevel::ALL {
            assert_eq!(b.as_str().parse::<BiasLevel>().unwrap(), b);
        }
        assert_eq!(
            "Title-Only".parse::<BiasLevel>().unwrap(),
            BiasLevel::TitleOnly
        );
        assert_eq!("HEAVY".parse::<BiasLevel>().unwrap(), BiasLevel::Heavy);
        assert!("strong".parse::<BiasLevel>().is_err());
    }

    #[test]
    fn protocol_json() {
        let p = ReviewProtocol::from_json(
            r#"{"review_id":"clezar","review_title":"Carotid stenosis",
                "inclusion_criteria":["RCTs","Adults"],"exclusion_criteria":["Animals"],
                "search_year":2023}"#,
        )
        .unwrap();
        assert_eq!(p.inclusion_criteria.len(), 2);
        let err = ReviewProtocol::from_json(
            r#"{"review_id":"x","review_title":"t","inclusion_criteria":[],"search_year":2023}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::InvalidProtocol(_)));
    }
}
