//! RIS tag-line parsing.
//!
//! A record is a `TY  - ` line, any number of `XX  - value` lines and a
//! closing `ER  - ` line. Lines that do not carry a tag prefix continue the
//! previous tag's value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CorpusError, GroundTruth, Record};

/// Raw tag sequence of one TY..ER block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDraft {
    pub raw_tags: Vec<(String, String)>,
    pub source_file: PathBuf,
    /// 1-based inclusive line numbers of the TY and ER lines.
    pub line_span: (usize, usize),
}

impl RecordDraft {
    /// First value for `tag`, if present.
    pub fn first(&self, tag: &str) -> Option<&str> {
        self.raw_tags
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, v)| v.as_str())
    }
}

/// A block that could not be turned into a draft.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRecord {
    pub source_file: PathBuf,
    pub line_span: (usize, usize),
    pub message: String,
}

impl std::fmt::Display for MalformedRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}-{}: {}",
            self.source_file.display(),
            self.line_span.0,
            self.line_span.1,
            self.message
        )
    }
}

/// Drafts in file order plus every malformed block encountered.
#[derive(Debug, Clone, Default)]
pub struct RisParse {
    pub drafts: Vec<RecordDraft>,
    pub errors: Vec<MalformedRecord>,
}

fn split_tag_line(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    if bytes.len() < 5 {
        return None;
    }
    let tag_ok = bytes[0].is_ascii_uppercase() && bytes[1].is_ascii_alphanumeric();
    if !tag_ok || &bytes[2..5] != b"  -" {
        return None;
    }
    let rest = &line[5..];
    let value = rest.strip_prefix(' ').unwrap_or(rest);
    // `TI  -value` is not a tag line; only `TI  -` and `TI  - value` are.
    if !rest.is_empty() && !rest.starts_with(' ') {
        return None;
    }
    Some((&line[..2], value.trim_end()))
}

enum State {
    Outside,
    InRecord {
        start: usize,
        tags: Vec<(String, String)>,
    },
    /// Skipping a block that started without TY.
    Stray {
        start: usize,
    },
}

/// Parse an RIS byte stream.
///
/// A leading UTF-8 byte-order mark is ignored. Malformed blocks are reported
/// and skipped; parsing continues with the next block.
pub fn parse_ris(bytes: &[u8], source_file: &Path) -> Result<RisParse, CorpusError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes)?;

    let mut out = RisParse::default();
    let mut state = State::Outside;
    let mut last_line = 0;
    let malformed = |start: usize, end: usize, message: &str| MalformedRecord {
        source_file: source_file.to_path_buf(),
        line_span: (start, end),
        message: message.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.trim_end_matches('\r');

        match split_tag_line(line) {
            Some((tag, value)) => {
                state = match (state, tag) {
                    (State::Outside, "TY") => State::InRecord {
                        start: lineno,
                        tags: vec![(tag.to_string(), value.to_string())],
                    },
                    (State::Outside, "ER") => {
                        out.errors
                            .push(malformed(lineno, lineno, "ER without a preceding TY"));
                        State::Outside
                    }
                    (State::Outside, _) => State::Stray { start: lineno },
                    (State::InRecord { start, mut tags }, "ER") => {
                        tags.push((tag.to_string(), value.to_string()));
                        out.drafts.push(RecordDraft {
                            raw_tags: tags,
                            source_file: source_file.to_path_buf(),
                            line_span: (start, lineno),
                        });
                        State::Outside
                    }
                    (State::InRecord { start, .. }, "TY") => {
                        out.errors.push(malformed(
                            start,
                            lineno - 1,
                            "record not terminated by ER before next TY",
                        ));
                        State::InRecord {
                            start: lineno,
                            tags: vec![(tag.to_string(), value.to_string())],
                        }
                    }
                    (State::InRecord { start, mut tags }, _) => {
                        tags.push((tag.to_string(), value.to_string()));
                        State::InRecord { start, tags }
                    }
                    (State::Stray { start }, "ER") => {
                        out.errors
                            .push(malformed(start, lineno, "ER without a preceding TY"));
                        State::Outside
                    }
                    (State::Stray { start }, "TY") => {
                        out.errors.push(malformed(
                            start,
                            lineno - 1,
                            "tags outside a TY..ER block",
                        ));
                        State::InRecord {
                            start: lineno,
                            tags: vec![(tag.to_string(), value.to_string())],
                        }
                    }
                    (stray @ State::Stray { .. }, _) => stray,
                };
            }
            None => {
                let continuation = line.trim();
                if continuation.is_empty() {
                    continue;
                }
                if let State::InRecord { tags, .. } = &mut state {
                    if let Some((_, value)) = tags.last_mut() {
                        if !value.is_empty() {
                            value.push(' ');
                        }
                        value.push_str(continuation);
                    }
                }
            }
        }
    }

    match state {
        State::Outside => {}
        State::InRecord { start, .. } => {
            out.errors.push(malformed(
                start,
                last_line,
                "truncated record: end of input before ER",
            ));
        }
        State::Stray { start } => {
            out.errors.push(malformed(
                start,
                last_line,
                "tags outside a TY..ER block at end of input",
            ));
        }
    }
    Ok(out)
}

/// Serialize drafts back to RIS text, one tag per line.
pub fn write_ris(drafts: &[RecordDraft]) -> String {
    let mut out = String::new();
    for draft in drafts {
        for (tag, value) in &draft.raw_tags {
            if value.is_empty() {
                let _ = writeln!(out, "{tag}  -");
            } else {
                let _ = writeln!(out, "{tag}  - {value}");
            }
        }
        out.push('\n');
    }
    out
}

fn four_digit_prefix(value: &str) -> Option<i32> {
    let prefix = value.trim().get(..4)?;
    if prefix.bytes().all(|b| b.is_ascii_digit()) {
        prefix.parse().ok()
    } else {
        None
    }
}

fn non_empty(value: Option<&str>) -> Option<&str> {
    value.map(str::trim).filter(|v| !v.is_empty())
}

/// Map a draft onto a [`Record`].
///
/// Title comes from TI (or T1), abstract from AB (or N2), year from the
/// four-digit prefix of PY (or Y1), authors from AU/A1 in tag order.
/// `ordinal` is the draft's position within its review and becomes part of
/// the record id.
pub fn to_record(
    draft: &RecordDraft,
    review_id: &str,
    ordinal: usize,
) -> Result<Record, CorpusError> {
    let title = non_empty(draft.first("TI"))
        .or_else(|| non_empty(draft.first("T1")))
        .ok_or_else(|| CorpusError::MissingTitle {
            source_file: draft.source_file.clone(),
            start: draft.line_span.0,
            end: draft.line_span.1,
        })?;
    let abstract_text = non_empty(draft.first("AB")).or_else(|| non_empty(draft.first("N2")));
    let year = ["PY", "Y1"]
        .iter()
        .find_map(|tag| draft.first(tag).and_then(four_digit_prefix));
    let authors = draft
        .raw_tags
        .iter()
        .filter(|(tag, _)| tag == "AU" || tag == "A1")
        .map(|(_, value)| value.trim().to_string())
        .filter(|value| !value.is_empty())
        .collect();

    Ok(Record {
        record_id: format!("{review_id}-{ordinal:06}"),
        review_id: review_id.to_string(),
        title: title.to_string(),
        abstract_text: abstract_text.map(str::to_string),
        year,
        authors,
        ground_truth: GroundTruth::Unlabelled,
        drop_reason: None,
    })
}
