use crate::output::{ensure_dir, read, read_string, write_json, write_text, Diag};
use crate::{AnalysisArgs, Common, ReportFormat, RulesArg, ScanArgs, UsageError};
use anyhow::{anyhow, Context, Result};
use firmscope_core::callgraph::{analyze as analyze_graph, ingest_cgx, ChainLimits, SinkCatalog};
use firmscope_core::carve::{self, Digest, Manifest, PartitionRecord};
use firmscope_core::creds::{classify_hash, parse_shadow, HashClass, MalformedLine};
use firmscope_core::netmap::{self, ScanConfig, ScanResult};
use firmscope_core::report::{
    build_report, render, BinaryPart, DigestedInput, Format, ReportParts, ScanPart,
    SCHEMA_VERSION,
};
use firmscope_core::rules::{scan_credentials, CredentialHit, Rules};
use firmscope_core::triage::{triage_inventory, walk_tree, FileClass, FileInventory};
use firmscope_core::{finding, Category, Diagnostic, Evidence, Finding, Severity};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Default)]
pub struct Outcome {
    pub max: Option<Severity>,
    pub fail_on: Option<Severity>,
}

impl Outcome {
    fn of(findings: &[Finding], common: &Common) -> Self {
        Self {
            max: finding::max_severity(findings),
            fail_on: common.fail_on,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match (self.max, self.fail_on) {
            (Some(max), Some(threshold)) if max >= threshold => 1,
            _ => 0,
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn timestamp(common: &Common) -> Option<String> {
    (!common.reproducible)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn load_rules(arg: &RulesArg) -> Result<Rules> {
    let path = arg.rules.clone().or_else(|| {
        std::env::var_os("FIRMSCOPE_RULES")
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    match path {
        Some(p) => Rules::from_file(&p).map_err(Into::into),
        None => Ok(Rules::default()),
    }
}

fn load_catalog(name: &str) -> Result<SinkCatalog> {
    if name == "default" {
        Ok(SinkCatalog::default())
    } else {
        SinkCatalog::from_file(Path::new(name)).map_err(Into::into)
    }
}

fn limits(a: &AnalysisArgs) -> Result<ChainLimits> {
    if a.max_depth == 0 || a.max_chains == 0 {
        return Err(usage("--max-depth and --max-chains must be at least 1"));
    }
    Ok(ChainLimits {
        max_depth: a.max_depth,
        max_chains: a.max_chains,
    })
}

/// Findings written by `triage` and `creds`, read back by `report`.
#[derive(Debug, Serialize, Deserialize)]
struct FindingsFile {
    schema_version: u32,
    source: String,
    findings: Vec<Finding>,
}

/// Scan output written by `scan`, read back by `report`.
#[derive(Debug, Serialize, Deserialize)]
struct ScanFile {
    schema_version: u32,
    target: String,
    result: ScanResult,
}

fn write_report(parts: ReportParts, format: ReportFormat, out: &Path) -> Result<Vec<Finding>> {
    let report = build_report(parts)?;
    let formats: &[Format] = match format {
        ReportFormat::Json => &[Format::Json],
        ReportFormat::Markdown => &[Format::Markdown],
        ReportFormat::Both => &[Format::Json, Format::Markdown],
    };
    for &f in formats {
        write_text(&out.join(format!("report.{}", f.extension())), &render(&report, f)?)?;
    }
    Ok(report.findings)
}

// carve

fn carve_to(diag: &Diag, image: &Path, table: Option<&Path>, out: &Path) -> Result<Manifest> {
    let img = carve::load_image(image)?;
    let table = table
        .map(|t| read_string(t).and_then(|s| carve::parse_offset_table(&s).map_err(Into::into)))
        .transpose()?;
    let hits = carve::scan_magics(&img);
    let result = carve::carve(&img, &hits, table.as_deref())?;
    for r in &result.records {
        if r.checksum_ok == Some(false) {
            diag.emit(&Diagnostic::warning(
                "carve",
                format!("uImage '{}' at {:#x} fails its CRC check", r.label(), r.offset),
            ));
        }
    }
    carve::write_partitions(&img, &result, out)
        .with_context(|| format!("writing partitions under {}", out.display()))
}

pub fn carve(diag: &Diag, image: &Path, table: Option<&Path>, common: &Common) -> Result<Outcome> {
    carve_to(diag, image, table, &common.out)?;
    Ok(Outcome::of(&[], common))
}

// triage

fn triage_to(diag: &Diag, root: &Path, rules: &Rules, out: &Path) -> Result<(FileInventory, Vec<Finding>)> {
    let inv = walk_tree(root)?;
    diag.emit_all(&inv.warnings);
    let findings = triage_inventory(&inv, rules);
    write_json(&out.join("inventory.json"), &inv.entries)?;
    write_json(
        &out.join("findings.json"),
        &FindingsFile {
            schema_version: SCHEMA_VERSION,
            source: root.display().to_string(),
            findings: findings.clone(),
        },
    )?;
    Ok((inv, findings))
}

pub fn triage(diag: &Diag, root: &Path, rules: &RulesArg, common: &Common) -> Result<Outcome> {
    let rules = load_rules(rules)?;
    let (_, findings) = triage_to(diag, root, &rules, &common.out)?;
    Ok(Outcome::of(&findings, common))
}

// creds

#[derive(Debug, Serialize)]
struct ShadowRow {
    user: String,
    line: u32,
    #[serde(flatten)]
    class: HashClass,
}

#[derive(Debug, Serialize)]
struct CredsFile {
    path: String,
    shadow: Vec<ShadowRow>,
    malformed: Vec<MalformedLine>,
    credentials: Vec<CredentialHit>,
}

fn is_shadow_name(p: &Path) -> bool {
    matches!(
        p.file_name().and_then(|n| n.to_str()),
        Some("shadow" | "passwd" | "shadow-" | "passwd-")
    )
}

pub fn creds(diag: &Diag, files: &[PathBuf], rules: &RulesArg, common: &Common) -> Result<Outcome> {
    let rules = load_rules(rules)?;
    let mut reports = Vec::new();
    let mut findings = Vec::new();
    for path in files {
        let text = String::from_utf8_lossy(&read(path)?).into_owned();
        let shown = path.display().to_string();
        let mut file = CredsFile {
            path: shown.clone(),
            shadow: Vec::new(),
            malformed: Vec::new(),
            credentials: Vec::new(),
        };
        if is_shadow_name(path) {
            let lines: Vec<&str> = text.lines().collect();
            let parsed = parse_shadow(&text);
            for m in &parsed.errors {
                diag.emit(&Diagnostic::warning(
                    "creds",
                    format!("{shown}:{}: {}", m.line, m.reason),
                ));
            }
            for e in parsed.entries {
                let raw = e.to_line();
                let line = lines.iter().position(|l| *l == raw).map_or(0, |i| i as u32 + 1);
                let class = classify_hash(&e.hash_field);
                if class.weak {
                    findings.push(Finding::new(
                        Category::WeakHash,
                        Evidence {
                            path: shown.clone(),
                            line: Some(line),
                            excerpt: Some(e.hash_field.clone()),
                        },
                        0,
                        format!("password hash for '{}' uses {:?}", e.user, class.scheme).to_lowercase(),
                    ));
                }
                file.shadow.push(ShadowRow {
                    user: e.user,
                    line,
                    class,
                });
            }
            file.malformed = parsed.errors;
        } else {
            file.credentials = scan_credentials(&rules, &text);
            for (i, hit) in file.credentials.iter().enumerate() {
                let ordinal = file.credentials[..i].iter().filter(|h| h.line == hit.line).count();
                findings.push(Finding::new(
                    Category::PlaintextCredential,
                    Evidence {
                        path: shown.clone(),
                        line: Some(hit.line),
                        excerpt: Some(hit.value.clone()),
                    },
                    ordinal,
                    format!("plaintext value for '{}'", hit.key),
                ));
            }
        }
        reports.push(file);
    }
    finding::sort_findings(&mut findings);
    write_json(&common.out.join("creds.json"), &reports)?;
    write_json(
        &common.out.join("findings.json"),
        &FindingsFile {
            schema_version: SCHEMA_VERSION,
            source: "creds".into(),
            findings: findings.clone(),
        },
    )?;
    Ok(Outcome::of(&findings, common))
}

// ingest-elf

fn cgx_file_name(label: &str) -> String {
    let stem: String = label
        .trim_start_matches(['/', '.'])
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{stem}.cgx.json")
}

/// Ingests one ELF and writes its CGX; returns the CGX text.
fn ingest_to(diag: &Diag, elf: &Path, label: &str, out_dir: &Path) -> Result<String> {
    let bytes = read(elf)?;
    let ingest = firmscope_core::elf::ingest_elf(&bytes)
        .with_context(|| format!("ingesting {}", elf.display()))?;
    diag.emit_all(&ingest.warnings);
    let mut text = serde_json::to_string_pretty(&ingest.document)?;
    text.push('\n');
    write_text(&out_dir.join(cgx_file_name(label)), &text)?;
    Ok(text)
}

pub fn ingest_elf(diag: &Diag, elf: &Path, common: &Common) -> Result<Outcome> {
    let label = elf
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "binary".into());
    ingest_to(diag, elf, &label, &common.out)?;
    Ok(Outcome::of(&[], common))
}

// analyze

fn binary_part(name: String, cgx_text: &str, sha256: String, catalog: &SinkCatalog, limits: ChainLimits) -> Result<BinaryPart> {
    let graph = ingest_cgx(cgx_text).with_context(|| format!("call graph {name}"))?;
    let analysis = analyze_graph(&graph, catalog, limits).with_context(|| format!("analyzing {name}"))?;
    Ok(BinaryPart {
        name,
        sha256,
        analysis,
    })
}

fn load_binaries(paths: &[PathBuf], a: &AnalysisArgs) -> Result<Vec<BinaryPart>> {
    let catalog = load_catalog(&a.catalog)?;
    let limits = limits(a)?;
    paths
        .iter()
        .map(|p| {
            let bytes = read(p)?;
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", p.display()))?;
            let sha = Digest::of(text.as_bytes()).to_hex();
            binary_part(p.display().to_string(), &text, sha, &catalog, limits)
        })
        .collect()
}

pub fn analyze(diag: &Diag, cgx: &[PathBuf], a: &AnalysisArgs, format: ReportFormat, common: &Common) -> Result<Outcome> {
    let binaries = load_binaries(cgx, a)?;
    let diagnostics = orphan_notes(&binaries);
    diag.emit_all(&diagnostics);
    let findings = write_report(
        ReportParts {
            binaries,
            diagnostics,
            generated_at: timestamp(common),
            ..Default::default()
        },
        format,
        &common.out,
    )?;
    Ok(Outcome::of(&findings, common))
}

fn orphan_notes(binaries: &[BinaryPart]) -> Vec<Diagnostic> {
    binaries
        .iter()
        .flat_map(|b| {
            b.analysis.orphans.iter().map(move |o| {
                Diagnostic::info("callgraph", format!("{}: {o} has no callers and is not a thread entry", b.name))
            })
        })
        .collect()
}

// scan

fn parse_payloads(path: &Path) -> Result<BTreeMap<u16, Vec<u8>>> {
    let raw: BTreeMap<String, String> = serde_json::from_str(&read_string(path)?)
        .with_context(|| format!("payload file {}", path.display()))?;
    raw.into_iter()
        .map(|(port, payload)| {
            let port: u16 = port.parse().map_err(|_| anyhow!("payload port '{port}' is not a port number"))?;
            let bytes = hex::decode(payload.trim()).map_err(|e| anyhow!("payload for port {port}: {e}"))?;
            Ok((port, bytes))
        })
        .collect()
}

fn run_scan(diag: &Diag, s: &ScanArgs, host: &str) -> Result<ScanResult> {
    let tcp = netmap::parse_port_spec(&s.tcp).map_err(|e| usage(e.to_string()))?;
    let udp = netmap::parse_port_spec(&s.udp).map_err(|e| usage(e.to_string()))?;
    let payloads = s.payloads.as_deref().map(parse_payloads).transpose()?.unwrap_or_default();
    let cfg = ScanConfig {
        timeout_ms: s.timeout_ms,
        max_in_flight: s.max_in_flight,
        banner_ms: s.banner_ms,
        owns_host: s.i_own_this_host,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let result = rt.block_on(async {
        let t = netmap::tcp_scan(host, &tcp, &cfg).await?;
        let u = netmap::udp_probe(host, &udp, &payloads, &cfg).await?;
        Ok::<_, netmap::ScanError>(netmap::merge_results(t, u))
    });
    match result {
        Ok(r) => Ok(r),
        Err(e @ (netmap::ScanError::OutOfScope(_)
        | netmap::ScanError::PortZero
        | netmap::ScanError::NoPorts
        | netmap::ScanError::Timeout
        | netmap::ScanError::Concurrency
        | netmap::ScanError::PortSpec(_))) => Err(usage(e.to_string())),
        Err(e) => {
            if e.is_retriable() {
                diag.emit(&Diagnostic::warning("netmap", "retry with a lower --max-in-flight"));
            }
            Err(e.into())
        }
    }
}

pub fn scan(diag: &Diag, s: &ScanArgs, cgx: &[PathBuf], common: &Common) -> Result<Outcome> {
    let host = s.host.as_deref().ok_or_else(|| usage("scan needs --host"))?;
    let result = run_scan(diag, s, host)?;
    write_json(
        &common.out.join("scan.json"),
        &ScanFile {
            schema_version: SCHEMA_VERSION,
            target: host.to_string(),
            result: result.clone(),
        },
    )?;
    if !cgx.is_empty() {
        let binaries = load_binaries(cgx, &AnalysisArgs {
            catalog: "default".into(),
            max_depth: 64,
            max_chains: 10_000,
        })?;
        let bindings: Vec<_> = binaries.iter().flat_map(|b| b.analysis.ports.bindings.clone()).collect();
        write_json(&common.out.join("discrepancies.json"), &netmap::compare_with_static(&bindings, &result))?;
    }
    Ok(Outcome::of(&[], common))
}

// report

pub struct ReportInputs<'a> {
    pub manifest: Option<&'a Path>,
    pub findings: &'a [PathBuf],
    pub cgx: &'a [PathBuf],
    pub scan: Option<&'a Path>,
}

fn manifest_parts(m: Manifest) -> (DigestedInput, Vec<PartitionRecord>) {
    (
        DigestedInput {
            path: m.image.source_path,
            sha256: m.image.sha256.to_hex(),
        },
        m.partitions.into_iter().map(|p| p.record).collect(),
    )
}

pub fn report(diag: &Diag, inputs: ReportInputs<'_>, a: &AnalysisArgs, format: ReportFormat, common: &Common) -> Result<Outcome> {
    let mut parts = ReportParts {
        generated_at: timestamp(common),
        ..Default::default()
    };
    if let Some(m) = inputs.manifest {
        let manifest: Manifest = serde_json::from_str(&read_string(m)?)
            .with_context(|| format!("manifest {}", m.display()))?;
        let (image, partitions) = manifest_parts(manifest);
        parts.image = Some(image);
        parts.partitions = partitions;
    }
    for f in inputs.findings {
        let file: FindingsFile = serde_json::from_str(&read_string(f)?)
            .with_context(|| format!("findings file {}", f.display()))?;
        if parts.tree_root.is_none() && file.source != "creds" {
            parts.tree_root = Some(file.source);
        }
        parts.findings.extend(file.findings);
    }
    parts.binaries = load_binaries(inputs.cgx, a)?;
    parts.diagnostics = orphan_notes(&parts.binaries);
    if let Some(s) = inputs.scan {
        let file: ScanFile = serde_json::from_str(&read_string(s)?)
            .with_context(|| format!("scan file {}", s.display()))?;
        parts.scan = Some(ScanPart {
            target: file.target,
            result: file.result,
        });
    }
    diag.emit_all(&parts.diagnostics);
    let findings = write_report(parts, format, &common.out).map_err(|e| {
        if e.downcast_ref::<firmscope_core::report::ReportError>().is_some() {
            usage(e.to_string())
        } else {
            e
        }
    })?;
    Ok(Outcome::of(&findings, common))
}

// all

pub struct AllInputs<'a> {
    pub image: Option<&'a Path>,
    pub table: Option<&'a Path>,
    pub tree: Option<&'a Path>,
    pub cgx: &'a [PathBuf],
}

#[allow(clippy::too_many_arguments)]
pub fn all(
    diag: &Diag,
    inputs: AllInputs<'_>,
    rules: &RulesArg,
    a: &AnalysisArgs,
    s: &ScanArgs,
    format: ReportFormat,
    common: &Common,
) -> Result<Outcome> {
    if inputs.image.is_none() && inputs.tree.is_none() && inputs.cgx.is_empty() && s.host.is_none() {
        return Err(usage("all needs at least one of --image, --tree, --cgx or --host"));
    }
    if inputs.table.is_some() && inputs.image.is_none() {
        return Err(usage("--table requires --image"));
    }
    let out = &common.out;
    ensure_dir(out)?;
    let mut parts = ReportParts {
        generated_at: timestamp(common),
        ..Default::default()
    };
    let mut diagnostics = Vec::new();

    if let Some(image) = inputs.image {
        let manifest = carve_to(diag, image, inputs.table, &out.join("carve"))?;
        let (img, partitions) = manifest_parts(manifest);
        parts.image = Some(img);
        parts.partitions = partitions;
    }

    let catalog = load_catalog(&a.catalog)?;
    let limits = limits(a)?;
    if let Some(tree) = inputs.tree {
        let rules = load_rules(rules)?;
        let (inv, findings) = triage_to(diag, tree, &rules, &out.join("triage"))?;
        parts.tree_root = Some(tree.display().to_string());
        parts.findings = findings;
        for entry in inv.of_class(FileClass::ElfExecutable) {
            match ingest_to(diag, &inv.absolute(entry), &entry.path, &out.join("cgx")) {
                Ok(text) => {
                    let sha = Digest::of(&read(&inv.absolute(entry))?).to_hex();
                    parts
                        .binaries
                        .push(binary_part(entry.path.clone(), &text, sha, &catalog, limits)?);
                }
                // Not every ELF in a tree is an ARM32 executable.
                Err(e) => diagnostics.push(Diagnostic::warning("elf", format!("{}: {e:#}", entry.path))),
            }
        }
    }
    parts.binaries.extend(load_binaries(inputs.cgx, a)?);
    diagnostics.extend(orphan_notes(&parts.binaries));

    if let Some(host) = s.host.as_deref() {
        let result = run_scan(diag, s, host)?;
        write_json(
            &out.join("scan.json"),
            &ScanFile {
                schema_version: SCHEMA_VERSION,
                target: host.to_string(),
                result: result.clone(),
            },
        )?;
        parts.scan = Some(ScanPart {
            target: host.to_string(),
            result,
        });
    }

    diag.emit_all(&diagnostics);
    parts.diagnostics = diagnostics;
    let findings = write_report(parts, format, out)?;
    Ok(Outcome::of(&findings, common))
}
