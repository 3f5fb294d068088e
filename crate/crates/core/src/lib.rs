//! Zero-shot LLM abstract screening for systematic reviews.
//!
//! The crate is organised as a file-based pipeline:
//!
//! - [`corpus`]: RIS ingestion, cleaning, deduplication, ground-truth labelling
//!   and balanced subset construction.
//! - [`protocol`]: review criteria, the bias-ladder prompt templates and verdict
//!   parsing.
//! - [`gateway`]: chat-completion transport, retry with exponential backoff, the
//!   include-on-failure policy and a record/replay cache.
//! - [`engine`]: resumable screening runs over a decision store, repeat trials
//!   and import of human screening decisions.
//! - [`evaluation`]: confusion matrices, screening metrics, Cohen's kappa and
//!   correlation statistics.
//! - [`ensemble`]: series (AND) and parallel (OR) combination of two screeners.

pub mod corpus;
pub mod digest;
pub mod engine;
pub mod ensemble;
pub mod evaluation;
pub mod gateway;
pub mod protocol;

pub use corpus::{GroundTruth, Record};
pub use protocol::{BiasLevel, ReviewProtocol, Verdict};
