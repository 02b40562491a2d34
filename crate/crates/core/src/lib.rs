//! Firmware and binary attack-surface triage.
//!
//! The crate is organised along the triage pipeline:
//!
//! * [`carve`] loads raw flash dumps read-only, finds partition boundaries by
//!   magic signatures or an explicit offset table, and carves typed blobs.
//! * [`triage`] walks an extracted filesystem tree and flags credentials,
//!   sensitive files and unsafe update scripts; [`creds`] holds the
//!   `passwd`/`shadow` parsing and hash classification it relies on.
//! * [`callgraph`] is the analysis core: it ingests CGX call graphs, finds
//!   candidate points (calls to catalogued sinks), enumerates invocation
//!   chains from `main` and thread entry points, and maps threads to the
//!   ports they bind.
//! * [`elf`] produces CGX documents from 32-bit little-endian ARM executables.
//! * [`netmap`] probes a live host and cross-checks the static bindings.
//! * [`report`] merges everything into a versioned JSON/Markdown report.

pub mod callgraph;
pub mod carve;
pub mod creds;
pub mod diag;
pub mod elf;
pub mod finding;
pub mod netmap;
pub mod report;
pub mod rules;
pub mod triage;

pub use diag::{Diagnostic, Level};
pub use finding::{Category, Evidence, Finding, Severity};

/// Version string stamped into reports and manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
