//! Aggregates findings, chains, bindings and live-scan discrepancies into
//! one versioned report, rendered as canonical JSON or Markdown.
//!
//! Severity mapping:
//!
//! | finding | severity |
//! |---|---|
//! | `plaintext_credential`, `weak_hash`, `unsigned_update_path` | high |
//! | `sensitive_file` | medium |
//! | `init_script`, `hardcoded_endpoint` | info |
//! | `reachable_sink`, execution tier, root binds a port | critical |
//! | `reachable_sink`, execution tier, unbound root | high |
//! | `reachable_sink`, memory tier | high if bound, else medium |
//! | `reachable_sink`, any other tier | medium if bound, else low |

mod render;

pub use render::{render, Format, RenderError};

use crate::callgraph::{
    Analysis, CandidatePoint, InvocationChain, Protocol, ServiceBinding, Site, UnknownProtocolBind,
};
use crate::carve::PartitionRecord;
use crate::diag::Diagnostic;
use crate::finding::{max_severity, Category, Evidence, Finding, Severity};
use crate::netmap::{compare_with_static, Discrepancies, ScanResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;
/// `generated_at` value used for reproducible output.
pub const REPRODUCIBLE_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigestedInput {
    pub path: String,
    /// Hex-encoded SHA-256 of the file contents.
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub image: Option<DigestedInput>,
    pub tree_root: Option<String>,
    pub cgx: Vec<DigestedInput>,
    pub scan_target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub candidate: CandidatePoint,
    pub discarded: u64,
    pub discarded_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadSummary {
    pub root: String,
    pub label: String,
    pub chains: usize,
    pub bound: bool,
}

/// Per-binary analysis results. Each count is the length of the matching
/// list; [`Report::check_counts`] verifies this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSummary {
    pub binary: String,
    pub raw_candidates: usize,
    pub deduped_candidates: usize,
    pub chains: usize,
    pub truncations: usize,
    pub raw: Vec<CandidatePoint>,
    pub deduped: Vec<CandidatePoint>,
    pub invocation_chains: Vec<InvocationChain>,
    pub truncated: Vec<Truncation>,
    pub threads: Vec<ThreadSummary>,
    pub orphans: Vec<String>,
    pub unknown_protocol: Vec<UnknownProtocolBind>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundService {
    pub binary: String,
    pub thread_root: String,
    pub port: u16,
    pub protocol: Protocol,
    pub bind_site: Site,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub generated_at: String,
    pub inputs: Inputs,
    /// Sorted by descending severity, then category, path, line and id.
    pub findings: Vec<Finding>,
    pub partitions: Vec<PartitionRecord>,
    pub candidate_summaries: Vec<CandidateSummary>,
    pub bindings: Vec<BoundService>,
    pub discrepancies: Option<Discrepancies>,
    pub scan: Option<ScanResult>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Report {
    pub fn max_severity(&self) -> Option<Severity> {
        max_severity(&self.findings)
    }

    pub fn check_counts(&self) -> Result<(), String> {
        for s in &self.candidate_summaries {
            let pairs = [
                ("raw_candidates", s.raw_candidates, s.raw.len()),
                ("deduped_candidates", s.deduped_candidates, s.deduped.len()),
                ("chains", s.chains, s.invocation_chains.len()),
                ("truncations", s.truncations, s.truncated.len()),
            ];
            for (field, count, len) in pairs {
                if count != len {
                    return Err(format!("{}: {field} is {count} but the list has {len}", s.binary));
                }
            }
        }
        Ok(())
    }
}

/// One analysed call graph.
#[derive(Debug, Clone)]
pub struct BinaryPart {
    pub name: String,
    pub sha256: String,
    pub analysis: Analysis,
}

#[derive(Debug, Clone)]
pub struct ScanPart {
    pub target: String,
    pub result: ScanResult,
}

/// Inputs to [`build_report`]. Any subset may be present, but not none.
#[derive(Debug, Clone, Default)]
pub struct ReportParts {
    pub image: Option<DigestedInput>,
    pub partitions: Vec<PartitionRecord>,
    pub tree_root: Option<String>,
    pub findings: Vec<Finding>,
    pub binaries: Vec<BinaryPart>,
    pub scan: Option<ScanPart>,
    pub diagnostics: Vec<Diagnostic>,
    /// RFC 3339 timestamp; `None` yields [`REPRODUCIBLE_TIMESTAMP`].
    pub generated_at: Option<String>,
}

impl ReportParts {
    fn is_empty(&self) -> bool {
        self.image.is_none()
            && self.partitions.is_empty()
            && self.tree_root.is_none()
            && self.findings.is_empty()
            && self.binaries.is_empty()
            && self.scan.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report: no image, tree, call graph, findings or scan supplied")]
    Empty,
}

/// Severity of a sink reachable from `root`, by catalog tier and whether
/// the root binds a port.
pub fn reachable_sink_severity(tier: &str, bound: bool) -> Severity {
    match (tier, bound) {
        ("execution", true) => Severity::Critical,
        ("execution", false) | ("memory", true) => Severity::High,
        ("memory", false) | (_, true) => Severity::Medium,
        _ => Severity::Low,
    }
}

/// Severity of a finding as assigned by the report builder.
pub fn severity_of(finding: &Finding) -> Severity {
    match finding.category {
        Category::ReachableSink => finding.severity,
        c => c.default_severity(),
    }
}

fn render_path(path: &[String]) -> String {
    path.join(" -> ")
}

/// One finding per (root, containing function, sink); the excerpt shows the
/// shortest chain and the description counts all of them.
fn sink_findings(part: &BinaryPart) -> Vec<Finding> {
    let bound = part.analysis.ports.bound_roots();
    let mut services: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for b in &part.analysis.ports.bindings {
        services
            .entry(b.thread_root.as_str())
            .or_default()
            .push(format!("{}/{}", b.port, b.protocol));
    }
    for b in &part.analysis.ports.unknown_protocol {
        services
            .entry(b.thread_root.as_str())
            .or_default()
            .push(format!("{}/unknown", b.port));
    }

    let mut out = Vec::new();
    for group in &part.analysis.threads {
        let mut by_target: BTreeMap<(&str, &str), Vec<&InvocationChain>> = BTreeMap::new();
        for c in &group.chains {
            by_target
                .entry((&c.candidate.containing_function, &c.candidate.sink))
                .or_default()
                .push(c);
        }
        for ((function, sink), chains) in by_target {
            let shortest = chains
                .iter()
                .min_by(|a, b| a.path.len().cmp(&b.path.len()).then(a.path.cmp(&b.path)))
                .expect("group is non-empty");
            let is_bound = bound.contains(group.root.as_str());
            let severity = reachable_sink_severity(&shortest.candidate.tier, is_bound);
            let exposure = match services.get(group.root.as_str()) {
                Some(s) => format!("thread {} bound to {}", group.label, s.join(", ")),
                None => format!("thread {} with no bound port", group.label),
            };
            let truncated = if chains.iter().any(|c| c.truncated) { " (truncated)" } else { "" };
            out.push(Finding {
                id: format!("reachable_sink:{}:{}:{function}:{sink}", part.name, group.root),
                category: Category::ReachableSink,
                severity,
                evidence: Evidence {
                    path: part.name.clone(),
                    line: None,
                    excerpt: Some(render_path(&shortest.path)),
                },
                description: format!(
                    "{sink} ({} tier) in {function} reachable from {exposure} via {} chain(s){truncated}",
                    shortest.candidate.tier,
                    chains.len()
                ),
            });
        }
    }
    out
}

fn summary(part: &BinaryPart) -> CandidateSummary {
    let a = &part.analysis;
    let bound = a.ports.bound_roots();
    let invocation_chains: Vec<InvocationChain> =
        a.enumerations.iter().flat_map(|e| e.chains.iter().cloned()).collect();
    let truncated: Vec<Truncation> = a
        .enumerations
        .iter()
        .filter(|e| e.truncated)
        .map(|e| Truncation {
            candidate: e.candidate.clone(),
            discarded: e.discarded,
            discarded_exact: e.discarded_exact,
        })
        .collect();
    CandidateSummary {
        binary: part.name.clone(),
        raw_candidates: a.raw_candidates.len(),
        deduped_candidates: a.candidates.len(),
        chains: invocation_chains.len(),
        truncations: truncated.len(),
        raw: a.raw_candidates.clone(),
        deduped: a.candidates.clone(),
        invocation_chains,
        truncated,
        threads: a
            .threads
            .iter()
            .map(|g| ThreadSummary {
                root: g.root.clone(),
                label: g.label.clone(),
                chains: g.chains.len(),
                bound: bound.contains(g.root.as_str()),
            })
            .collect(),
        orphans: a.orphans.clone(),
        unknown_protocol: a.ports.unknown_protocol.clone(),
    }
}

/// Orders findings by descending severity, then category, path, line, id.
pub fn order_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then(a.category.cmp(&b.category))
            .then(a.sort_key().cmp(&b.sort_key()))
    });
}

pub fn build_report(parts: ReportParts) -> Result<Report, ReportError> {
    if parts.is_empty() {
        return Err(ReportError::Empty);
    }

    let mut findings: Vec<Finding> = parts
        .findings
        .into_iter()
        .map(|mut f| {
            f.severity = severity_of(&f);
            f
        })
        .collect();
    let mut bindings = Vec::new();
    let mut static_bindings: Vec<ServiceBinding> = Vec::new();
    let mut summaries = Vec::new();
    let mut cgx = Vec::new();
    for part in &parts.binaries {
        findings.extend(sink_findings(part));
        summaries.push(summary(part));
        cgx.push(DigestedInput {
            path: part.name.clone(),
            sha256: part.sha256.clone(),
        });
        for b in &part.analysis.ports.bindings {
            bindings.push(BoundService {
                binary: part.name.clone(),
                thread_root: b.thread_root.clone(),
                port: b.port,
                protocol: b.protocol,
                bind_site: b.bind_site.clone(),
            });
            static_bindings.push(b.clone());
        }
    }
    order_findings(&mut findings);
    findings.dedup_by(|a, b| a.id == b.id);
    bindings.sort();

    let discrepancies = parts
        .scan
        .as_ref()
        .filter(|_| !parts.binaries.is_empty())
        .map(|s| compare_with_static(&static_bindings, &s.result));

    let mut diagnostics = parts.diagnostics;
    diagnostics.sort();
    diagnostics.dedup();

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: crate::TOOL_VERSION.to_string(),
        generated_at: parts
            .generated_at
            .unwrap_or_else(|| REPRODUCIBLE_TIMESTAMP.to_string()),
        inputs: Inputs {
            image: parts.image,
            tree_root: parts.tree_root,
            cgx,
            scan_target: parts.scan.as_ref().map(|s| s.target.clone()),
        },
        findings,
        partitions: parts.partitions,
        candidate_summaries: summaries,
        bindings,
        discrepancies,
        scan: parts.scan.map(|s| s.result),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finding(category: Category, path: &str, line: u32) -> Finding {
        Finding::new(
            category,
            Evidence {
                path: path.into(),
                line: Some(line),
                excerpt: None,
            },
            0,
            "x",
        )
    }

    #[test]
    fn empty_parts_rejected() {
        assert_eq!(build_report(ReportParts::default()).unwrap_err(), ReportError::Empty);
    }

    #[test]
    fn init_script_alone_is_info() {
        let r = build_report(ReportParts {
            findings: vec![finding(Category::InitScript, "etc/init.d/S01udev", 1)],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.max_severity(), Some(Severity::Info));
        assert_eq!(r.generated_at, REPRODUCIBLE_TIMESTAMP);
    }

    #[test]
    fn fixed_category_severities_are_reapplied() {
        let f = finding(Category::WeakHash, "shadow", 1).with_severity(Severity::Low);
        let r = build_report(ReportParts {
            findings: vec![f, finding(Category::HardcodedEndpoint, "a.cfg", 2)],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.findings[0].severity, Severity::High);
        assert_eq!(r.findings[1].severity, Severity::Info);
    }

    #[test]
    fn sink_severity_table() {
        assert_eq!(reachable_sink_severity("execution", true), Severity::Critical);
        assert_eq!(reachable_sink_severity("execution", false), Severity::High);
        assert_eq!(reachable_sink_severity("memory", true), Severity::High);
        assert_eq!(reachable_sink_severity("memory", false), Severity::Medium);
        assert_eq!(reachable_sink_severity("input", true), Severity::Medium);
        assert_eq!(reachable_sink_severity("input", false), Severity::Low);
        // binding never lowers severity
        for tier in ["execution", "memory", "input", "custom"] {
            assert!(reachable_sink_severity(tier, true) >= reachable_sink_severity(tier, false));
        }
    }
}
