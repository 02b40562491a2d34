//! `passwd`/`shadow` parsing and crypt(3) hash-format classification.
//!
//! Only classification is done here; nothing attempts to recover passwords.

use crate::rules::{self, CredentialHit, Rules};
use serde::{Deserialize, Serialize};

/// One line of a shadow (or passwd) file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowEntry {
    pub user: String,
    pub hash_field: String,
    /// Aging fields after the hash, kept verbatim (possibly empty strings).
    pub rest: Vec<String>,
}

impl ShadowEntry {
    /// Reassembles the original line.
    pub fn to_line(&self) -> String {
        let mut fields = Vec::with_capacity(self.rest.len() + 2);
        fields.push(self.user.as_str());
        fields.push(self.hash_field.as_str());
        fields.extend(self.rest.iter().map(String::as_str));
        fields.join(":")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    /// 1-based line number.
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowParse {
    pub entries: Vec<ShadowEntry>,
    /// Lines that were rejected. Parsing continues past them.
    pub errors: Vec<MalformedLine>,
}

/// Parses shadow-format text. Blank lines are skipped; a line needs at least
/// two colon-separated fields and a non-empty user name.
pub fn parse_shadow(text: &str) -> ShadowParse {
    let mut out = ShadowParse::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split(':');
        let user = fields.next().unwrap_or_default();
        let Some(hash_field) = fields.next() else {
            out.errors.push(MalformedLine {
                line: line_no,
                reason: "fewer than 2 colon-separated fields".into(),
            });
            continue;
        };
        if user.is_empty() {
            out.errors.push(MalformedLine {
                line: line_no,
                reason: "empty user name".into(),
            });
            continue;
        }
        out.entries.push(ShadowEntry {
            user: user.to_string(),
            hash_field: hash_field.to_string(),
            rest: fields.map(str::to_string).collect(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashScheme {
    Descrypt,
    Md5crypt,
    Sha256crypt,
    Sha512crypt,
    LockedOrEmpty,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashClass {
    pub scheme: HashScheme,
    pub weak: bool,
}

fn is_crypt_alphabet(c: char) -> bool {
    c == '.' || c == '/' || c.is_ascii_alphanumeric()
}

/// Classifies a shadow hash field. Total: every input maps to exactly one
/// scheme. Only descrypt is considered weak.
pub fn classify_hash(hash_field: &str) -> HashClass {
    let scheme = match hash_field {
        "" | "!" | "*" | "!!" => HashScheme::LockedOrEmpty,
        h if h.starts_with("$1$") => HashScheme::Md5crypt,
        h if h.starts_with("$5$") => HashScheme::Sha256crypt,
        h if h.starts_with("$6$") => HashScheme::Sha512crypt,
        h if h.len() == 13 && h.chars().all(is_crypt_alphabet) => HashScheme::Descrypt,
        _ => HashScheme::Unknown,
    };
    HashClass {
        scheme,
        weak: scheme == HashScheme::Descrypt,
    }
}

/// Finds plaintext credential assignments in configuration text using the
/// shared rule set.
pub fn scan_plaintext_credentials(rules: &Rules, text: &str) -> Vec<CredentialHit> {
    rules::scan_credentials(rules, text)
}
