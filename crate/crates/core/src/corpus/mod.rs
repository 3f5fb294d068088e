//! Bibliographic corpus handling: RIS ingestion through to the balanced
//! evaluation subset.

mod clean;
mod io;
mod ris;
mod subset;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{
    attach_ground_truth, clean_records, deduplicate, normalize_title, CleanOutcome, DedupKey,
    Deduplicated, GroundTruthOutcome,
};
pub use io::{
    parse_inclusion_csv, parse_inclusion_ris, read_corpus, read_inclusion_list, write_corpus,
    InclusionEntry,
};
pub use ris::{parse_ris, to_record, write_ris, MalformedRecord, RecordDraft, RisParse};
pub use subset::{build_balanced_subset, SubsetSpec};

/// Ground-truth label attached from a review's inclusion list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    IncludedInReview,
    ExcludedFromReview,
    Unlabelled,
}

/// Why a record was removed from the analysable corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Duplicate,
    MissingAbstract,
    PublishedAfterSearch,
}

/// One bibliographic item.
///
/// Field order matches the line-delimited JSON corpus format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: String,
    pub review_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
    pub year: Option<i32>,
    #[serde(default)]
    pub authors: Vec<String>,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
}

impl Record {
    /// Non-empty abstract, if any.
    pub fn abstract_str(&self) -> Option<&str> {
        self.abstract_text
            .as_deref()
            .filter(|text| !text.trim().is_empty())
    }

    pub fn is_kept(&self) -> bool {
        self.drop_reason.is_none()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),
    #[error("record at {source_file}:{start}-{end} has no TI or T1 title")]
    MissingTitle {
        source_file: PathBuf,
        start: usize,
        end: usize,
    },
    #[error("review {review_id} has {available} excluded records, {required} required")]
    InsufficientExcludes {
        review_id: String,
        available: usize,
        required: usize,
    },
    #[error("corpus line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("inclusion list row {row}: {message}")]
    InclusionList { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
