use anyhow::{Context, Result};
use firmscope_core::Diagnostic;
use serde::Serialize;
use std::path::Path;

/// Writes diagnostics and errors to stderr, as text or JSON lines.
pub struct Diag {
    json: bool,
}

impl Diag {
    pub fn new(json: bool) -> Self {
        Self { json }
    }

    pub fn emit(&self, d: &Diagnostic) {
        if self.json {
            eprintln!("{}", serde_json::to_string(d).unwrap_or_default());
        } else {
            eprintln!("{d}");
        }
    }

    pub fn emit_all(&self, ds: &[Diagnostic]) {
        ds.iter().for_each(|d| self.emit(d));
    }

    pub fn error(&self, e: &anyhow::Error) {
        if self.json {
            let v = serde_json::json!({ "level": "error", "message": format!("{e:#}") });
            eprintln!("{v}");
        } else {
            eprintln!("error: {e:#}");
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
