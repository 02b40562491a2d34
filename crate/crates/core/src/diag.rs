use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Info,
    Warning,
}

/// A non-fatal message produced while processing an input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    /// Module that emitted the message, e.g. `"triage"` or `"elf"`.
    pub source: String,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(source: &str, message: impl Into<String>) -> Self {
        Self {
            level: Level::Warning,
            source: source.to_string(),
            message: message.into(),
        }
    }

    pub fn info(source: &str, message: impl Into<String>) -> Self {
        Self {
            level: Level::Info,
            source: source.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Info => "info",
            Level::Warning => "warning",
        };
        write!(f, "{level}[{}]: {}", self.source, self.message)
    }
}
