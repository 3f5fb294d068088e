//! Corpus files (line-delimited JSON) and inclusion lists (RIS or CSV).

use std::io::{BufRead, Write};
use std::path::Path;

use super::{parse_ris, CorpusError, Record};

/// One entry of a review's inclusion list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionEntry {
    pub title: String,
    pub year: Option<i32>,
}

/// Write one JSON object per record, LF-terminated.
pub fn write_corpus<W: Write>(mut writer: W, records: &[Record]) -> Result<(), CorpusError> {
    for record in records {
        serde_json::to_writer(&mut writer, record)
            .map_err(|source| CorpusError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a line-delimited JSON corpus. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Record>, CorpusError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            line: idx + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

fn parse_year(value: &str) -> Option<i32> {
    let trimmed = value.trim();
    let prefix = trimmed.get(..4)?;
    if prefix.bytes().all(|b| b.is_ascii_digit()) {
        prefix.parse().ok()
    } else {
        None
    }
}

/// Two-column `title,year` CSV. A header row naming those columns is optional.
pub fn parse_inclusion_csv(bytes: &[u8]) -> Result<Vec<InclusionEntry>, CorpusError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut entries = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let title = row.get(0).unwrap_or_default();
        let year = row.get(1).unwrap_or_default();
        if idx == 0 && title.eq_ignore_ascii_case("title") && year.eq_ignore_ascii_case("year") {
            continue;
        }
        if title.is_empty() {
            return Err(CorpusError::InclusionList {
                row: idx + 1,
                message: "empty title".into(),
            });
        }
        let year = if year.is_empty() {
            None
        } else {
            Some(parse_year(year).ok_or_else(|| CorpusError::InclusionList {
                row: idx + 1,
                message: format!("unparseable year {year:?}"),
            })?)
        };
        entries.push(InclusionEntry {
            title: title.to_string(),
            year,
        });
    }
    Ok(entries)
}

/// Inclusion list exported as RIS; malformed blocks are skipped with a warning.
pub fn parse_inclusion_ris(
    bytes: &[u8],
    source: &Path,
) -> Result<Vec<InclusionEntry>, CorpusError> {
    let parsed = parse_ris(bytes, source)?;
    for err in &parsed.errors {
        log::warn!("inclusion list: {err}");
    }
    let mut entries = Vec::new();
    for (idx, draft) in parsed.drafts.iter().enumerate() {
        match super::to_record(draft, "inclusion", idx) {
            Ok(record) => entries.push(InclusionEntry {
                title: record.title,
                year: record.year,
            }),
            Err(err) => log::warn!("inclusion list: {err}"),
        }
    }
    Ok(entries)
}

/// Load an inclusion list, choosing the format by extension (`.csv` or RIS).
pub fn read_inclusion_list(path: &Path) -> Result<Vec<InclusionEntry>, CorpusError> {
    let bytes = std::fs::read(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_inclusion_csv(&bytes)
    } else {
        parse_inclusion_ris(&bytes, path)
    }
}
