//! The triage result type shared by every producer of findings.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Five-level ordinal severity. `Ord` follows increasing severity, so the
/// maximum of a set of findings is its overall severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL_DESCENDING: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Info,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "info" => Ok(Severity::Info),
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            "critical" => Ok(Severity::Critical),
            other => Err(format!("unknown severity '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    PlaintextCredential,
    WeakHash,
    InitScript,
    UnsignedUpdatePath,
    HardcodedEndpoint,
    SensitiveFile,
    /// A catalogued sink reachable from a program or thread entry point.
    ReachableSink,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::PlaintextCredential => "plaintext_credential",
            Category::WeakHash => "weak_hash",
            Category::InitScript => "init_script",
            Category::UnsignedUpdatePath => "unsigned_update_path",
            Category::HardcodedEndpoint => "hardcoded_endpoint",
            Category::SensitiveFile => "sensitive_file",
            Category::ReachableSink => "reachable_sink",
        }
    }

    /// Severity for categories whose severity does not depend on context.
    /// `ReachableSink` severity depends on the sink tier and thread binding
    /// and is assigned by the report builder.
    pub fn default_severity(self) -> Severity {
        match self {
            Category::PlaintextCredential | Category::WeakHash | Category::UnsignedUpdatePath => {
                Severity::High
            }
            Category::SensitiveFile => Severity::Medium,
            Category::InitScript | Category::HardcodedEndpoint => Severity::Info,
            Category::ReachableSink => Severity::Low,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a finding was observed. `excerpt`, when present, is a verbatim
/// substring of line `line` of `path`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excerpt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub category: Category,
    pub severity: Severity,
    pub evidence: Evidence,
    pub description: String,
}

impl Finding {
    /// Builds a finding with the category's default severity and an id
    /// derived from category, path, line and an ordinal for repeated hits on
    /// the same line.
    pub fn new(
        category: Category,
        evidence: Evidence,
        ordinal: usize,
        description: impl Into<String>,
    ) -> Self {
        let mut id = format!("{}:{}", category.as_str(), evidence.path);
        if let Some(line) = evidence.line {
            id.push_str(&format!(":{line}"));
        }
        if ordinal > 0 {
            id.push_str(&format!("#{ordinal}"));
        }
        Self {
            id,
            category,
            severity: category.default_severity(),
            evidence,
            description: description.into(),
        }
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    /// Ordering used for every finding list: by path, then line, then id.
    pub fn sort_key(&self) -> (&str, u32, &str) {
        (
            self.evidence.path.as_str(),
            self.evidence.line.unwrap_or(0),
            self.id.as_str(),
        )
    }
}

/// Sorts findings by (path, line, id) so output does not depend on scan order.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Highest severity in `findings`, or `None` for an empty slice.
pub fn max_severity(findings: &[Finding]) -> Option<Severity> {
    findings.iter().map(|f| f.severity).max()
}
