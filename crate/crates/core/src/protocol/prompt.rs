//! Prompt templates and rendering.
//!
//! Prompt files are plain text split into sections by `=== <bias-level> ===`
//! header lines. Lines before the first header starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiasLevel, ProtocolError, ReviewProtocol};
use crate::corpus::Record;
use crate::digest::sha256_hex;

/// The prompt file shipped with the crate.
pub const CANONICAL_PROMPTS: &str = include_str!("../../prompts/canonical-v1.txt");

const PLACEHOLDERS: [&str; 5] = [
    "review_title",
    "inclusion_list",
    "exclusion_list",
    "record_title",
    "record_abstract",
];

/// How the rendered prompt is framed for the target model.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dialect {
    #[default]
    Plain,
    /// Wrap the prompt in model-specific special tokens, taken from the
    /// backend configuration.
    SpecialTokenWrapped { begin: String, end: String },
}

/// A validated template for one bias level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    bias: BiasLevel,
    template: String,
    dialect: Dialect,
}

fn placeholder_count(template: &str, name: &str) -> usize {
    template.matches(&format!("{{{name}}}")).count()
}

impl PromptSpec {
    pub fn new(bias: BiasLevel, template: String, dialect: Dialect) -> Result<Self, ProtocolError> {
        for name in PLACEHOLDERS {
            let count = placeholder_count(&template, name);
            let expected = if bias == BiasLevel::TitleOnly && name == "record_abstract" {
                0
            } else {
                1
            };
            if count != expected {
                return Err(ProtocolError::InvalidTemplate {
                    bias,
                    message: format!("{{{name}}} appears {count} times, expected {expected}"),
                });
            }
        }
        Ok(Self {
            bias,
            template,
            dialect,
        })
    }

    pub fn bias(&self) -> BiasLevel {
        self.bias
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn dialect(&self) -> &Dialect {
        &self.dialect
    }
}

fn numbered(items: &[String]) -> String {
    if items.is_empty() {
        return "None specified.".to_string();
    }
    items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{}. {}", i + 1, item.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Substitute every placeholder in one pass; substituted text is never
/// re-scanned.
fn substitute(template: &str, values: &BTreeMap<&str, &str>) -> String {
    let mut out =
        String::with_capacity(template.len() + values.values().map(|v| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let replaced = tail.find('}').and_then(|close| {
            let name = &tail[1..close];
            values.get(name).map(|value| (value, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Render the prompt for one record under a review protocol.
pub fn render_prompt(
    spec: &PromptSpec,
    protocol: &ReviewProtocol,
    record: &Record,
) -> Result<String, ProtocolError> {
    let title = record.title.trim();
    if title.is_empty() {
        return Err(ProtocolError::MissingTitle {
            record_id: record.record_id.clone(),
        });
    }
    let abstract_text = match (spec.bias, record.abstract_str()) {
        (BiasLevel::TitleOnly, _) => "",
        (_, Some(text)) => text.trim(),
        (_, None) => {
            return Err(ProtocolError::MissingAbstract {
                record_id: record.record_id.clone(),
            })
        }
    };

    let inclusion = numbered(&protocol.inclusion_criteria);
    let exclusion = numbered(&protocol.exclusion_criteria);
    let values = BTreeMap::from([
        ("review_title", protocol.review_title.trim()),
        ("inclusion_list", inclusion.as_str()),
        ("exclusion_list", exclusion.as_str()),
        ("record_title", title),
        ("record_abstract", abstract_text),
    ]);
    let body = substitute(&spec.template, &values);

    Ok(match &spec.dialect {
        Dialect::Plain => body,
        Dialect::SpecialTokenWrapped { begin, end } => format!("{begin}{body}{end}"),
    })
}

/// All six templates from one prompt file, with the file's checksum.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<BiasLevel, String>,
    checksum: String,
}

impl PromptSet {
    pub fn canonical() -> Self {
        Self::parse(CANONICAL_PROMPTS).expect("bundled prompt file is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let mut templates = BTreeMap::new();
        let mut current: Option<(BiasLevel, Vec<&str>)> = None;

        let mut finish = |section: Option<(BiasLevel, Vec<&str>)>| -> Result<(), ProtocolError> {
            if let Some((bias, lines)) = section {
                let body = lines.join("\n").trim().to_string();
                PromptSpec::new(bias, body.clone(), Dialect::Plain)?;
                if templates.insert(bias, body).is_some() {
                    return Err(ProtocolError::PromptFile(format!(
                        "duplicate section for {bias}"
                    )));
                }
            }
            Ok(())
        };

        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(name) = trimmed
                .strip_prefix("===")
                .and_then(|s| s.strip_suffix("==="))
            {
                let bias: BiasLevel = name.parse().map_err(|_| {
                    ProtocolError::PromptFile(format!(
                        "line {}: unknown section {:?}",
                        idx + 1,
                        name.trim()
                    ))
                })?;
                finish(current.take())?;
                current = Some((bias, Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !(trimmed.is_empty() || trimmed.starts_with('#')) {
                return Err(ProtocolError::PromptFile(format!(
                    "line {}: text before the first section header",
                    idx + 1
                )));
            }
        }
        finish(current.take())?;

        if let Some(missing) = BiasLevel::ALL.iter().find(|b| !templates.contains_key(b)) {
            return Err(ProtocolError::PromptFile(format!(
                "missing section for {missing}"
            )));
        }
        let set = Self {
            templates,
            checksum: sha256_hex(text.as_bytes()),
        };
        log::info!("loaded prompt file, sha256 {}", set.checksum);
        Ok(set)
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn template(&self, bias: BiasLevel) -> &str {
        &self.templates[&bias]
    }

    pub fn spec(&self, bias: BiasLevel, dialect: Dialect) -> PromptSpec {
        PromptSpec {
            bias,
            template: self.templates[&bias].clone(),
            dialect,
        }
    }
}
