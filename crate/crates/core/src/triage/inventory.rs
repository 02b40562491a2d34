use crate::diag::Diagnostic;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

/// Text scans read at most this many bytes per file.
pub const SCAN_CAP: u64 = 1 << 20;

const CONFIG_EXTENSIONS: [&str; 3] = ["cfg", "conf", "ini"];
const CONFIG_NAMES: [&str; 4] = ["passwd", "shadow", "fstab", "inittab"];

#[derive(Debug, thiserror::Error)]
pub enum TriageError {
    #[error("cannot read directory {path}: {source}")]
    Root {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileClass {
    ElfExecutable,
    ShellScript,
    Config,
    KeyMaterial,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    /// Path relative to the scanned root, `/`-separated.
    pub path: String,
    pub class: FileClass,
    pub size_bytes: u64,
    /// Target of a symbolic link. Links are recorded, never followed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileInventory {
    pub root: PathBuf,
    /// Sorted by path.
    pub entries: Vec<InventoryEntry>,
    pub warnings: Vec<Diagnostic>,
}

impl FileInventory {
    pub fn get(&self, path: &str) -> Option<&InventoryEntry> {
        self.entries
            .binary_search_by(|e| e.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn of_class(&self, class: FileClass) -> impl Iterator<Item = &InventoryEntry> {
        self.entries.iter().filter(move |e| e.class == class)
    }

    pub fn absolute(&self, entry: &InventoryEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Reads up to [`SCAN_CAP`] bytes of a regular file.
    pub(crate) fn read_capped(&self, entry: &InventoryEntry) -> std::io::Result<Vec<u8>> {
        read_head(&self.absolute(entry), SCAN_CAP)
    }
}

fn read_head(path: &Path, cap: u64) -> std::io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.take(cap).read_to_end(&mut buf)?;
    Ok(buf)
}

fn has_pem_boundary(head: &[u8]) -> bool {
    head.split(|&b| b == b'\n')
        .any(|line| line.starts_with(b"-----BEGIN "))
}

fn classify(rel: &str, head: &[u8]) -> FileClass {
    let base = rel.rsplit('/').next().unwrap_or(rel);
    let ext = Path::new(base)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    if head.starts_with(b"\x7fELF") {
        FileClass::ElfExecutable
    } else if head.starts_with(b"#!") || ext.as_deref() == Some("sh") {
        FileClass::ShellScript
    } else if ext.is_some_and(|e| CONFIG_EXTENSIONS.contains(&e.as_str()))
        || CONFIG_NAMES.contains(&base)
    {
        FileClass::Config
    } else if has_pem_boundary(head) {
        FileClass::KeyMaterial
    } else {
        FileClass::Other
    }
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

enum Walked {
    File(PathBuf),
    Link(PathBuf),
}

/// Recursively inventories `root`. Unreadable entries become warnings.
pub fn walk_tree(root: &Path) -> Result<FileInventory, TriageError> {
    let meta = std::fs::metadata(root).map_err(|source| TriageError::Root {
        path: root.display().to_string(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(TriageError::NotADirectory(root.display().to_string()));
    }
    std::fs::read_dir(root).map_err(|source| TriageError::Root {
        path: root.display().to_string(),
        source,
    })?;

    let mut warnings = Vec::new();
    let mut found = Vec::new();
    for item in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        match item {
            Ok(e) if e.file_type().is_symlink() => found.push(Walked::Link(e.into_path())),
            Ok(e) if e.file_type().is_file() => found.push(Walked::File(e.into_path())),
            Ok(_) => {}
            Err(err) => {
                let at = err
                    .path()
                    .map(|p| relative(root, p))
                    .unwrap_or_else(|| ".".into());
                warnings.push(Diagnostic::warning("triage", format!("{at}: {err}")));
            }
        }
    }

    let results: Vec<Result<(InventoryEntry, Option<Diagnostic>), Diagnostic>> = found
        .par_iter()
        .map(|w| match w {
            Walked::Link(p) => {
                let rel = relative(root, p);
                let target = std::fs::read_link(p)
                    .map_err(|e| Diagnostic::warning("triage", format!("{rel}: {e}")))?;
                Ok((
                    InventoryEntry {
                        path: rel,
                        class: FileClass::Other,
                        size_bytes: 0,
                        link_target: Some(target.to_string_lossy().into_owned()),
                    },
                    None,
                ))
            }
            Walked::File(p) => {
                let rel = relative(root, p);
                let fail = |e: std::io::Error| Diagnostic::warning("triage", format!("{rel}: {e}"));
                let size = std::fs::symlink_metadata(p).map_err(fail)?.len();
                let head = read_head(p, SCAN_CAP).map_err(fail)?;
                let class = classify(&rel, &head);
                let note = (size > SCAN_CAP && class != FileClass::ElfExecutable).then(|| {
                    Diagnostic::warning(
                        "triage",
                        format!("{rel}: {size} bytes, only the first {SCAN_CAP} are scanned"),
                    )
                });
                Ok((
                    InventoryEntry {
                        path: rel,
                        class,
                        size_bytes: size,
                        link_target: None,
                    },
                    note,
                ))
            }
        })
        .collect();

    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok((entry, note)) => {
                entries.push(entry);
                warnings.extend(note);
            }
            Err(d) => warnings.push(d),
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(FileInventory {
        root: root.to_path_buf(),
        entries,
        warnings,
    })
}
