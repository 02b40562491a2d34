//! `firmscope`: carve, triage, ingest, analyze, scan and report.
//!
//! Exit codes: 0 success, 1 findings at or above `--fail-on`, 2 usage
//! error, 3 I/O or parse error.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use firmscope_core::Severity;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "firmscope", version, about = "Firmware and binary attack-surface triage")]
struct Cli {
    /// Emit diagnostics and errors as JSON lines on stderr.
    #[arg(long, global = true)]
    diag_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Markdown,
    Both,
}

/// Flags shared by every command that writes artifacts.
#[derive(Debug, Args)]
pub struct Common {
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Exit with status 1 when a finding reaches this severity.
    #[arg(long, value_parser = parse_severity)]
    pub fail_on: Option<Severity>,
    /// Zero timestamps so identical inputs give byte-identical outputs.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Args)]
pub struct RulesArg {
    /// Rules JSON; falls back to $FIRMSCOPE_RULES, then the embedded default.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Sink catalog: `default` or a path to a catalog JSON.
    #[arg(long, default_value = "default")]
    pub catalog: String,
    #[arg(long, default_value_t = 64)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_chains: usize,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Target host. Only private and loopback addresses unless
    /// --i-own-this-host is given.
    #[arg(long)]
    pub host: Option<String>,
    /// TCP ports, e.g. `1-1024,8080`.
    #[arg(long, default_value = "1-10000")]
    pub tcp: String,
    /// UDP ports, e.g. `3702,5012`.
    #[arg(long, default_value = "3702,5012,5683,19966")]
    pub udp: String,
    #[arg(long, default_value_t = 500)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 128)]
    pub max_in_flight: usize,
    /// Wait this long for a banner on open TCP ports (0 disables).
    #[arg(long, default_value_t = 0)]
    pub banner_ms: u64,
    /// JSON object mapping UDP port to a hex payload.
    #[arg(long)]
    pub payloads: Option<PathBuf>,
    #[arg(long)]
    pub i_own_this_host: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Carve a flash dump into partitions.
    Carve {
        image: PathBuf,
        /// JSON offset table `[{"name","offset","length"?}]`.
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Inventory an extracted filesystem tree and flag sensitive content.
    Triage {
        root: PathBuf,
        #[command(flatten)]
        rules: RulesArg,
        #[command(flatten)]
        common: Common,
    },
    /// Classify shadow hashes and find plaintext credentials in files.
    Creds {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
        #[command(flatten)]
        common: Common,
    },
    /// Produce a CGX call graph from an ARM ELF32 executable.
    IngestElf {
        elf: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Find candidate points, chains, threads and ports in CGX call graphs.
    Analyze {
        #[arg(long, required = true)]
        cgx: Vec<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Probe a live host and optionally compare with CGX bindings.
    Scan {
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        cgx: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Assemble a report from artifacts written by other commands.
    Report {
        /// manifest.json written by `carve`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// findings.json written by `triage` or `creds`.
        #[arg(long)]
        findings: Vec<PathBuf>,
        #[arg(long)]
        cgx: Vec<PathBuf>,
        /// scan.json written by `scan`.
        #[arg(long)]
        scan: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Run the whole pipeline: carve, triage, ingest ELFs, analyze, scan, report.
    All {
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Extracted filesystem tree; ELF executables in it are ingested.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        cgx: Vec<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Print the embedded default rules.
    Rules {
        #[command(subcommand)]
        action: DumpAction,
    },
    /// Print the embedded default sink catalog.
    Catalog {
        #[command(subcommand)]
        action: DumpAction,
    },
}

#[derive(Debug, Subcommand)]
enum DumpAction {
    Dump,
}

fn parse_severity(s: &str) -> Result<Severity, String> {
    s.parse()
}

/// An error in how the tool was invoked rather than in its inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let diag = output::Diag::new(cli.diag_json);
    let result = match cli.command {
        Command::Carve { image, table, common } => commands::carve(&diag, &image, table.as_deref(), &common),
        Command::Triage { root, rules, common } => commands::triage(&diag, &root, &rules, &common),
        Command::Creds { files, rules, common } => commands::creds(&diag, &files, &rules, &common),
        Command::IngestElf { elf, common } => commands::ingest_elf(&diag, &elf, &common),
        Command::Analyze { cgx, analysis, format, common } => {
            commands::analyze(&diag, &cgx, &analysis, format, &common)
        }
        Command::Scan { scan, cgx, common } => commands::scan(&diag, &scan, &cgx, &common),
        Command::Report { manifest, findings, cgx, scan, analysis, format, common } => {
            commands::report(
                &diag,
                commands::ReportInputs {
                    manifest: manifest.as_deref(),
                    findings: &findings,
                    cgx: &cgx,
                    scan: scan.as_deref(),
                },
                &analysis,
                format,
                &common,
            )
        }
        Command::All { image, table, tree, cgx, rules, analysis, scan, format, common } => {
            commands::all(
                &diag,
                commands::AllInputs {
                    image: image.as_deref(),
                    table: table.as_deref(),
                    tree: tree.as_deref(),
                    cgx: &cgx,
                },
                &rules,
                &analysis,
                &scan,
                format,
                &common,
            )
        }
        Command::Rules { action: DumpAction::Dump } => {
            print!("{}", firmscope_core::rules::DEFAULT_RULES_JSON);
            Ok(commands::Outcome::default())
        }
        Command::Catalog { action: DumpAction::Dump } => {
            print!("{}", firmscope_core::callgraph::DEFAULT_CATALOG_JSON);
            Ok(commands::Outcome::default())
        }
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            diag.error(&e);
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { 2 } else { 3 })
        }
    }
}
