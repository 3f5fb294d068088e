//! Run manifests: what a command read, how it was configured, and when.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use screenkit::digest::sha256_fields;
use serde::Serialize;

/// SHA-256 over the contents of `paths`, in order, with each file
/// length-prefixed so that concatenation boundaries matter.
pub fn digest_files(paths: &[PathBuf]) -> Result<String> {
    let contents = paths
        .iter()
        .map(|path| fs::read(path).with_context(|| format!("reading {}", path.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok(sha256_fields(contents.iter().map(Vec::as_slice)))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub started_at: String,
    pub finished_at: String,
    /// Digest of the backend config file, for commands that read one.
    pub config_digest: Option<String>,
    /// Digest of the prompt templates used.
    pub prompt_file_digest: Option<String>,
    /// Digest of the corpus or RIS inputs.
    pub corpus_digest: Option<String>,
    /// Parsed command-line flags.
    pub flags: serde_json::Value,
    /// Command-specific counts.
    pub summary: serde_json::Value,
}

pub struct ManifestBuilder {
    subcommand: &'static str,
    started_at: DateTime<Utc>,
    flags: serde_json::Value,
    pub config_digest: Option<String>,
    pub prompt_file_digest: Option<String>,
    pub corpus_digest: Option<String>,
}

impl ManifestBuilder {
    pub fn start<F: Serialize>(subcommand: &'static str, flags: &F) -> Self {
        Self {
            subcommand,
            started_at: Utc::now(),
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            config_digest: None,
            prompt_file_digest: None,
            corpus_digest: None,
        }
    }

    /// Write the manifest to `explicit`, else next to `output`, else stderr.
    pub fn finish<S: Serialize>(
        self,
        summary: &S,
        explicit: Option<&Path>,
        output: Option<&Path>,
    ) -> Result<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at: self.started_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config_digest: self.config_digest,
            prompt_file_digest: self.prompt_file_digest,
            corpus_digest: self.corpus_digest,
            flags: self.flags,
            summary: serde_json::to_value(summary)?,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let target = explicit
            .map(Path::to_path_buf)
            .or_else(|| output.map(manifest_path_for));
        match target {
            Some(path) => fs::write(&path, text)
                .with_context(|| format!("writing manifest {}", path.display())),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
