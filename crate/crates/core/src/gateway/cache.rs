//! Append-only record/replay cache of completions.
//!
//! The file starts with a header line `{"format":"screenkit-cache","version":1}`
//! followed by one [`CacheEntry`] per line. Entries are never rewritten; a
//! torn final line left by an interrupted run is ignored on load.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CompletionOutcome, CompletionStatus, GatewayError};
use crate::digest::{sha256_fields, sha256_hex};

const FORMAT: &str = "screenkit-cache";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    /// Always call the backend; no cache.
    Live,
    /// Serve from the cache only; a miss is an error.
    Replay,
    /// Serve hits from the cache, call the backend on a miss and record it.
    RecordReplay,
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheMode::Live => "live",
            CacheMode::Replay => "replay",
            CacheMode::RecordReplay => "record-replay",
        })
    }
}

impl FromStr for CacheMode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(CacheMode::Live),
            "replay" => Ok(CacheMode::Replay),
            "record-replay" | "record_replay" => Ok(CacheMode::RecordReplay),
            other => Err(GatewayError::Config(format!(
                "unknown cache mode {other:?}"
            ))),
        }
    }
}

/// Inputs that determine a completion, reduced to a SHA-256 key.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub model_id: String,
    pub prompt_sha256: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub digest: String,
}

impl CacheKey {
    pub fn new(model_id: &str, prompt: &str, temperature: f64, max_tokens: u32) -> Self {
        Self::from_prompt_digest(
            model_id,
            sha256_hex(prompt.as_bytes()),
            temperature,
            max_tokens,
        )
    }

    fn from_prompt_digest(
        model_id: &str,
        prompt_sha256: String,
        temperature: f64,
        max_tokens: u32,
    ) -> Self {
        let digest = sha256_fields([
            model_id.as_bytes(),
            prompt_sha256.as_bytes(),
            &temperature.to_bits().to_le_bytes(),
            &max_tokens.to_le_bytes(),
        ]);
        Self {
            model_id: model_id.to_string(),
            prompt_sha256,
            temperature,
            max_tokens,
            digest,
        }
    }
}

/// One recorded completion. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub prompt_sha256: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub status: CompletionStatus,
    pub raw_text: Option<String>,
    pub attempts: u32,
    pub recorded_at: DateTime<Utc>,
    /// Digest over the key and payload, checked on load.
    pub checksum: String,
}

impl CacheEntry {
    pub fn new(key: &CacheKey, outcome: &CompletionOutcome) -> Self {
        let mut entry = Self {
            key: key.digest.clone(),
            model_id: key.model_id.clone(),
            prompt_sha256: key.prompt_sha256.clone(),
            temperature: key.temperature,
            max_tokens: key.max_tokens,
            status: outcome.status,
            raw_text: outcome.raw_text.clone(),
            attempts: outcome.attempts,
            recorded_at: outcome.completed_at,
            checksum: String::new(),
        };
        entry.checksum = entry.compute_checksum();
        entry
    }

    fn compute_checksum(&self) -> String {
        let status = serde_json::to_string(&self.status).unwrap_or_default();
        let raw = serde_json::to_string(&self.raw_text).unwrap_or_default();
        let recorded = self.recorded_at.to_rfc3339();
        sha256_fields([
            self.key.as_bytes(),
            status.as_bytes(),
            raw.as_bytes(),
            &self.attempts.to_le_bytes(),
            recorded.as_bytes(),
        ])
    }

    fn verify(&self) -> Result<(), String> {
        let recomputed = CacheKey::from_prompt_digest(
            &self.model_id,
            self.prompt_sha256.clone(),
            self.temperature,
            self.max_tokens,
        );
        if recomputed.digest != self.key {
            return Err(format!("key {} does not match its inputs", self.key));
        }
        if self.compute_checksum() != self.checksum {
            return Err(format!("checksum mismatch for key {}", self.key));
        }
        Ok(())
    }

    pub fn outcome(&self) -> CompletionOutcome {
        CompletionOutcome {
            status: self.status,
            raw_text: self.raw_text.clone(),
            attempts: self.attempts,
            latency: Duration::ZERO,
            completed_at: self.recorded_at,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Completions keyed by [`CacheKey`], optionally backed by a file.
#[derive(Debug)]
pub struct ResponseCache {
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Open (creating if absent) a cache file for appending.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let entries = if path.exists() {
            load_entries(path)?
        } else {
            HashMap::new()
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
        Ok(Self {
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    /// Open an existing cache file read-only.
    pub fn open_read_only(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self {
            entries: RwLock::new(load_entries(path)?),
            writer: None,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.entries.read().unwrap().get(&key.digest).cloned()
    }

    /// Record an outcome. An existing entry for the key is left untouched.
    pub fn insert(&self, key: &CacheKey, outcome: &CompletionOutcome) -> Result<(), GatewayError> {
        let entry = CacheEntry::new(key, outcome);
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(&entry.key) {
            return Ok(());
        }
        if let Some(writer) = &self.writer {
            let line = serde_json::to_string(&entry).expect("cache entry serializes");
            let mut file = writer.lock().unwrap();
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}

fn load_entries(path: &Path) -> Result<HashMap<String, CacheEntry>, GatewayError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines: Vec<String> = Vec::new();
    for line in reader.split(b'\n') {
        let bytes = line?;
        lines.push(String::from_utf8_lossy(&bytes).into_owned());
    }
    let ends_with_newline = std::fs::read(path)?.last().is_none_or(|b| *b == b'\n');

    let mut entries = HashMap::new();
    let total = lines.len();
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 {
            let header: Header =
                serde_json::from_str(line).map_err(|e| GatewayError::CorruptCache {
                    line: 1,
                    message: format!("bad header: {e}"),
                })?;
            if header.format != FORMAT || header.version != VERSION {
                return Err(GatewayError::CorruptCache {
                    line: 1,
                    message: format!(
                        "unsupported cache format {} v{}",
                        header.format, header.version
                    ),
                });
            }
            continue;
        }
        let torn = lineno == total && !ends_with_newline;
        let entry: CacheEntry = match serde_json::from_str(line) {
            Ok(entry) => entry,
            Err(e) if torn => {
                log::warn!("{}: ignoring torn final line: {e}", path.display());
                continue;
            }
            Err(e) => {
                return Err(GatewayError::CorruptCache {
                    line: lineno,
                    message: e.to_string(),
                })
            }
        };
        entry
            .verify()
            .map_err(|message| GatewayError::CorruptCache {
                line: lineno,
                message,
            })?;
        entries.entry(entry.key.clone()).or_insert(entry);
    }
    Ok(entries)
}

/// Resolve a completion through the cache.
///
/// In replay mode a miss is [`GatewayError::CacheMiss`]. In record-replay
/// mode a miss calls `live` and persists its outcome before returning it.
/// Live mode bypasses the cache.
pub fn replay_complete<F>(
    cache: &ResponseCache,
    mode: CacheMode,
    key: &CacheKey,
    live: F,
) -> Result<CompletionOutcome, GatewayError>
where
    F: FnOnce() -> Result<CompletionOutcome, GatewayError>,
{
    if mode == CacheMode::Live {
        return live();
    }
    if let Some(entry) = cache.get(key) {
        return Ok(entry.outcome());
    }
    match mode {
        CacheMode::Replay => Err(GatewayError::CacheMiss(key.digest.clone())),
        _ => {
            let outcome = live()?;
            cache.insert(key, &outcome)?;
            Ok(outcome)
        }
    }
}
