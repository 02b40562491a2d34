//! Pattern rules shared by filesystem triage and the credential auditor.
//!
//! A rules file is JSON with four arrays of regular expressions. The
//! embedded default can be dumped with `firmscope rules dump` and edited.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Embedded default rules document.
pub const DEFAULT_RULES_JSON: &str = include_str!("../assets/rules.default.json");

/// Values that are never reported as credentials regardless of key.
const PLACEHOLDERS: &[&str] = &["none", "null"];
/// Shortest credential value that is reported.
pub const MIN_SECRET_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("rules file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rules document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid pattern in {field}: {source}")]
    Pattern {
        field: &'static str,
        #[source]
        source: regex::Error,
    },
}

/// Serialized form of a rules file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesDoc {
    pub credential_keys: Vec<String>,
    pub removable_media: Vec<String>,
    pub flash_write: Vec<String>,
    pub integrity_tokens: Vec<String>,
}

/// Compiled rule set.
#[derive(Debug, Clone)]
pub struct Rules {
    doc: RulesDoc,
    credential_key: Regex,
    removable_media: Regex,
    flash_write: Regex,
    integrity: Regex,
    assignment: Regex,
}

/// A `key = value` or `key: value` assignment whose key names a secret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialHit {
    pub key: String,
    pub value: String,
    /// 1-based line number.
    pub line: u32,
    /// The full source line, without its terminator.
    pub text: String,
}

fn alternation(field: &'static str, patterns: &[String]) -> Result<Regex, RulesError> {
    let joined = if patterns.is_empty() {
        // matches nothing
        String::from("[^\\s\\S]")
    } else {
        patterns
            .iter()
            .map(|p| format!("(?:{p})"))
            .collect::<Vec<_>>()
            .join("|")
    };
    RegexBuilder::new(&joined)
        .case_insensitive(field == "credential_keys")
        .build()
        .map_err(|source| RulesError::Pattern { field, source })
}

impl Rules {
    pub fn from_doc(doc: RulesDoc) -> Result<Self, RulesError> {
        Ok(Self {
            credential_key: alternation("credential_keys", &doc.credential_keys)?,
            removable_media: alternation("removable_media", &doc.removable_media)?,
            flash_write: alternation("flash_write", &doc.flash_write)?,
            integrity: alternation("integrity_tokens", &doc.integrity_tokens)?,
            assignment: Regex::new(r"^\s*([A-Za-z0-9_.\-]+)\s*[=:]\s*(.*?)\s*$")
                .expect("static regex"),
            doc,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, RulesError> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, RulesError> {
        let text = std::fs::read_to_string(path).map_err(|source| RulesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn doc(&self) -> &RulesDoc {
        &self.doc
    }

    pub fn is_removable_media(&self, line: &str) -> bool {
        self.removable_media.is_match(line)
    }

    pub fn is_flash_write(&self, line: &str) -> bool {
        self.flash_write.is_match(line)
    }

    pub fn is_integrity_check(&self, line: &str) -> bool {
        self.integrity.is_match(line)
    }

    /// Returns the credential assignment on `line`, if any. Comment lines
    /// (`#` or `;` first) and placeholder or too-short values are ignored.
    pub fn credential_on_line(&self, line: &str, line_no: u32) -> Option<CredentialHit> {
        let trimmed = line.trim_start();
        if trimmed.starts_with('#') || trimmed.starts_with(';') {
            return None;
        }
        let caps = self.assignment.captures(line)?;
        let key = caps.get(1)?.as_str();
        if !self.credential_key.is_match(key) {
            return None;
        }
        let value = unquote(caps.get(2)?.as_str());
        if value.chars().count() < MIN_SECRET_LEN
            || PLACEHOLDERS.iter().any(|p| value.eq_ignore_ascii_case(p))
        {
            return None;
        }
        Some(CredentialHit {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
            text: line.to_string(),
        })
    }
}

impl Default for Rules {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES_JSON).expect("embedded rules are valid")
    }
}

fn unquote(value: &str) -> &str {
    for q in ['"', '\''] {
        if value.len() >= 2 && value.starts_with(q) && value.ends_with(q) {
            return &value[1..value.len() - 1];
        }
    }
    value
}

/// Scans configuration text for credential assignments.
pub fn scan_credentials(rules: &Rules, text: &str) -> Vec<CredentialHit> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| rules.credential_on_line(line, i as u32 + 1))
        .collect()
}
