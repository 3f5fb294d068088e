//! Append-only decision store.
//!
//! Line-delimited JSON: a header `{"format":"screenkit-decisions","version":1}`
//! then one [`ScreeningDecision`] per line.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EngineError, ScreeningDecision, ScreeningSource};
use crate::protocol::Decision;

const FORMAT: &str = "screenkit-decisions";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug)]
pub struct DecisionStore {
    decisions: Vec<ScreeningDecision>,
    index: HashMap<(ScreeningSource, String), usize>,
    file: Option<File>,
    path: Option<PathBuf>,
}

impl DecisionStore {
    pub fn in_memory() -> Self {
        Self {
            decisions: Vec::new(),
            index: HashMap::new(),
            file: None,
            path: None,
        }
    }

    /// Open a store file for appending, creating it if absent.
    pub fn open(path: &Path) -> Result<Self, EngineError> {
        let mut store = if path.exists() {
            Self::load(path)?
        } else {
            Self::in_memory()
        };
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            let header = serde_json::to_string(&Header {
                format: FORMAT.into(),
                version: VERSION,
            })
            .expect("header serializes");
            writeln!(file, "{header}")?;
            file.flush()?;
        }
        store.file = Some(file);
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    /// Read a store file without opening it for writing.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let bytes = std::fs::read(path)?;
        let ends_with_newline = bytes.last().is_none_or(|b| *b == b'\n');
        let reader = BufReader::new(bytes.as_slice());
        let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
        let total = lines.len();

        let mut store = Self::in_memory();
        store.path = Some(path.to_path_buf());
        for (idx, line) in lines.iter().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if lineno == 1 {
                let header: Header =
                    serde_json::from_str(line).map_err(|e| EngineError::CorruptStore {
                        line: 1,
                        message: format!("bad header: {e}"),
                    })?;
                if header.format != FORMAT || header.version != VERSION {
                    return Err(EngineError::CorruptStore {
                        line: 1,
                        message: format!(
                            "unsupported store format {} v{}",
                            header.format, header.version
                        ),
                    });
                }
                continue;
            }
            let decision: ScreeningDecision = match serde_json::from_str(line) {
                Ok(d) => d,
                Err(e) if lineno == total && !ends_with_newline => {
                    log::warn!("{}: ignoring torn final line: {e}", path.display());
                    continue;
                }
                Err(e) => {
                    return Err(EngineError::CorruptStore {
                        line: lineno,
                        message: e.to_string(),
                    })
                }
            };
            store.insert(decision)?;
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn insert(&mut self, decision: ScreeningDecision) -> Result<(), EngineError> {
        let key = (decision.source.clone(), decision.record_id.clone());
        if self.index.contains_key(&key) {
            return Err(EngineError::DuplicateDecision {
                record_id: decision.record_id,
                source_name: decision.source.to_string(),
            });
        }
        self.index.insert(key, self.decisions.len());
        self.decisions.push(decision);
        Ok(())
    }

    /// Append a decision, persisting it before it becomes visible.
    pub fn append(&mut self, decision: ScreeningDecision) -> Result<(), EngineError> {
        if self.contains(&decision.source, &decision.record_id) {
            return Err(EngineError::DuplicateDecision {
                record_id: decision.record_id,
                source_name: decision.source.to_string(),
            });
        }
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&decision).expect("decision serializes");
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.insert(decision)
    }

    pub fn contains(&self, source: &ScreeningSource, record_id: &str) -> bool {
        self.index
            .contains_key(&(source.clone(), record_id.to_string()))
    }

    pub fn get(&self, source: &ScreeningSource, record_id: &str) -> Option<&ScreeningDecision> {
        self.index
            .get(&(source.clone(), record_id.to_string()))
            .map(|&i| &self.decisions[i])
    }

    pub fn decisions(&self) -> &[ScreeningDecision] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Verdicts of one source keyed by record id.
    pub fn decisions_for(&self, source: &ScreeningSource) -> HashMap<String, Decision> {
        self.decisions
            .iter()
            .filter(|d| &d.source == source)
            .map(|d| (d.record_id.clone(), d.verdict))
            .collect()
    }

    /// Verdicts of one source restricted to `record_ids`.
    pub fn decisions_for_records(
        &self,
        source: &ScreeningSource,
        record_ids: &HashSet<&str>,
    ) -> HashMap<String, Decision> {
        self.decisions
            .iter()
            .filter(|d| &d.source == source && record_ids.contains(d.record_id.as_str()))
            .map(|d| (d.record_id.clone(), d.verdict))
            .collect()
    }

    /// Every source with at least one decision, sorted.
    pub fn sources(&self) -> Vec<ScreeningSource> {
        self.decisions
            .iter()
            .map(|d| d.source.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}
