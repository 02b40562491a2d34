use super::Report;
use crate::finding::Severity;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("unknown report format '{0}' (expected json or markdown)")]
    UnknownFormat(String),
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

impl FromStr for Format {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(RenderError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn render(report: &Report, format: Format) -> Result<String, RenderError> {
    match format {
        Format::Json => json(report),
        Format::Markdown => Ok(markdown(report)),
    }
}

/// Pretty JSON with object keys in sorted order (serde_json's default map
/// is ordered by key) and a trailing newline.
fn json(report: &Report) -> Result<String, RenderError> {
    let value = serde_json::to_value(report)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn code(s: &str) -> String {
    if s.contains('`') {
        format!("`` {s} ``")
    } else {
        format!("`{s}`")
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn heading_case(s: Severity) -> &'static str {
    match s {
        Severity::Critical => "Critical",
        Severity::High => "High",
        Severity::Medium => "Medium",
        Severity::Low => "Low",
        Severity::Info => "Info",
    }
}

fn markdown(r: &Report) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# Firmware attack-surface report\n");
    let _ = writeln!(w, "| Field | Value |\n|---|---|");
    let _ = writeln!(w, "| Schema version | {} |", r.schema_version);
    let _ = writeln!(w, "| Tool version | {} |", r.tool_version);
    let _ = writeln!(w, "| Generated | {} |", r.generated_at);
    let max = r.max_severity().map(|s| s.as_str()).unwrap_or("none");
    let _ = writeln!(w, "| Max severity | {max} |\n");

    let _ = writeln!(w, "## Inputs\n");
    let mut any_input = false;
    if let Some(img) = &r.inputs.image {
        let _ = writeln!(w, "- Image: {} (sha256 {})", code(&img.path), code(&img.sha256));
        any_input = true;
    }
    if let Some(tree) = &r.inputs.tree_root {
        let _ = writeln!(w, "- Filesystem tree: {}", code(tree));
        any_input = true;
    }
    for c in &r.inputs.cgx {
        let _ = writeln!(w, "- Call graph: {} (sha256 {})", code(&c.path), code(&c.sha256));
        any_input = true;
    }
    if let Some(t) = &r.inputs.scan_target {
        let _ = writeln!(w, "- Scan target: {}", code(t));
        any_input = true;
    }
    if !any_input {
        let _ = writeln!(w, "- Findings supplied directly");
    }
    let _ = writeln!(w);

    findings(w, r);
    partitions(w, r);
    candidates(w, r);
    bindings(w, r);
    scan(w, r);

    if !r.diagnostics.is_empty() {
        let _ = writeln!(w, "## Diagnostics\n");
        for d in &r.diagnostics {
            let _ = writeln!(w, "- {d}");
        }
        let _ = writeln!(w);
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}

fn findings(w: &mut String, r: &Report) {
    let _ = writeln!(w, "## Findings\n");
    if r.findings.is_empty() {
        let _ = writeln!(w, "No findings.\n");
        return;
    }
    let _ = writeln!(w, "| Severity | Count |\n|---|---|");
    for s in Severity::ALL_DESCENDING {
        let n = r.findings.iter().filter(|f| f.severity == s).count();
        if n > 0 {
            let _ = writeln!(w, "| {s} | {n} |");
        }
    }
    let _ = writeln!(w);
    for s in Severity::ALL_DESCENDING {
        let mut of_sev: Vec<_> = r.findings.iter().filter(|f| f.severity == s).collect();
        if of_sev.is_empty() {
            continue;
        }
        of_sev.sort_by(|a, b| a.category.cmp(&b.category).then(a.sort_key().cmp(&b.sort_key())));
        let _ = writeln!(w, "### {}\n", heading_case(s));
        let mut current = None;
        for f in of_sev {
            if current != Some(f.category) {
                if current.is_some() {
                    let _ = writeln!(w);
                }
                let _ = writeln!(w, "#### {}\n", f.category);
                current = Some(f.category);
            }
            let _ = writeln!(w, "- {}: {}", code(&f.id), f.description);
            let location = match f.evidence.line {
                Some(l) => format!("{}:{l}", f.evidence.path),
                None => f.evidence.path.clone(),
            };
            let _ = writeln!(w, "  - location: {}", code(&location));
            if let Some(ex) = &f.evidence.excerpt {
                let _ = writeln!(w, "  - excerpt: {}", code(ex));
            }
        }
        let _ = writeln!(w);
    }
}

fn partitions(w: &mut String, r: &Report) {
    if r.partitions.is_empty() {
        return;
    }
    let _ = writeln!(w, "## Partitions\n");
    let _ = writeln!(w, "| # | Label | Kind | Offset | Length | SHA-256 | CRC |");
    let _ = writeln!(w, "|---|---|---|---|---|---|---|");
    for (i, p) in r.partitions.iter().enumerate() {
        let crc = match p.checksum_ok {
            Some(true) => "ok",
            Some(false) => "BAD",
            None => "",
        };
        let _ = writeln!(
            w,
            "| {i} | {} | {} | 0x{:08x} | {} | {} | {crc} |",
            cell(p.label()),
            p.kind,
            p.offset,
            p.length,
            p.sha256.to_hex()
        );
    }
    let _ = writeln!(w);
}

fn candidates(w: &mut String, r: &Report) {
    if r.candidate_summaries.is_empty() {
        return;
    }
    let _ = writeln!(w, "## Candidate points\n");
    for s in &r.candidate_summaries {
        let _ = writeln!(w, "### {}\n", s.binary);
        let _ = writeln!(w, "- Raw candidate sites: {}", s.raw_candidates);
        let _ = writeln!(w, "- Deduplicated candidates: {}", s.deduped_candidates);
        let _ = writeln!(w, "- Invocation chains: {}", s.chains);
        let _ = writeln!(w, "- Truncated enumerations: {}\n", s.truncations);
        if !s.deduped.is_empty() {
            let _ = writeln!(w, "| Function | Sink | Tier | Site |\n|---|---|---|---|");
            for c in &s.deduped {
                let _ = writeln!(
                    w,
                    "| {} | {} | {} | {} |",
                    cell(&c.containing_function),
                    cell(&c.sink),
                    cell(&c.tier),
                    cell(&c.site.to_string())
                );
            }
            let _ = writeln!(w);
        }
        for t in &s.truncated {
            let bound = if t.discarded_exact { "" } else { "at least " };
            let _ = writeln!(
                w,
                "- Truncated: {} -> {} discarded {bound}{} path(s)",
                t.candidate.containing_function, t.candidate.sink, t.discarded
            );
        }
        if !s.truncated.is_empty() {
            let _ = writeln!(w);
        }
        if !s.threads.is_empty() {
            let _ = writeln!(w, "#### Threads\n");
            let _ = writeln!(w, "| Thread | Root | Chains | Bound |\n|---|---|---|---|");
            for t in &s.threads {
                let _ = writeln!(
                    w,
                    "| {} | {} | {} | {} |",
                    cell(&t.label),
                    cell(&t.root),
                    t.chains,
                    if t.bound { "yes" } else { "no" }
                );
            }
            let _ = writeln!(w);
        }
        if !s.orphans.is_empty() {
            let _ = writeln!(w, "Orphan functions: {}\n", s.orphans.join(", "));
        }
        for u in &s.unknown_protocol {
            let _ = writeln!(
                w,
                "- Bind of port {} in {} at {} has no recoverable protocol",
                u.port, u.thread_root, u.bind_site
            );
        }
        if !s.unknown_protocol.is_empty() {
            let _ = writeln!(w);
        }
    }
}

fn bindings(w: &mut String, r: &Report) {
    if r.bindings.is_empty() {
        return;
    }
    let _ = writeln!(w, "## Service bindings\n");
    let _ = writeln!(w, "| Binary | Thread root | Port | Protocol | Bind site |");
    let _ = writeln!(w, "|---|---|---|---|---|");
    for b in &r.bindings {
        let _ = writeln!(
            w,
            "| {} | {} | {} | {} | {} |",
            cell(&b.binary),
            cell(&b.thread_root),
            b.port,
            b.protocol,
            cell(&b.bind_site.to_string())
        );
    }
    let _ = writeln!(w);
}

fn scan(w: &mut String, r: &Report) {
    let Some(s) = &r.scan else { return };
    let _ = writeln!(w, "## Live scan\n");
    let tcp: Vec<String> = s.tcp_open.iter().map(u16::to_string).collect();
    let _ = writeln!(w, "- Host: {}", code(&s.host));
    let _ = writeln!(
        w,
        "- Open TCP ports: {}",
        if tcp.is_empty() { "none".to_string() } else { tcp.join(", ") }
    );
    for (port, state) in &s.udp_state {
        let state = serde_json::to_value(state)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(w, "- UDP {port}: {state}");
    }
    let _ = writeln!(w);
    if let Some(d) = &r.discrepancies {
        let _ = writeln!(w, "### Static versus live\n");
        let _ = writeln!(w, "| Status | Port | Protocol | Thread root |\n|---|---|---|---|");
        for (label, list) in [
            ("confirmed", &d.confirmed),
            ("static only", &d.static_only),
            ("live only", &d.live_only),
        ] {
            for e in list {
                let _ = writeln!(
                    w,
                    "| {label} | {} | {} | {} |",
                    e.port,
                    e.protocol,
                    cell(e.thread_root.as_deref().unwrap_or(""))
                );
            }
        }
        let _ = writeln!(w);
    }
}
