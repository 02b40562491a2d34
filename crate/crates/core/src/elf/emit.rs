use super::consts::recover_consts;
use super::decode::{decode_calls, CallScan};
use super::parse::{parse_elf32, ElfError, ElfView};
use crate::callgraph::{
    CallEdge, CgxDocument, ConstArg, ConstKind, FunctionNode, Site, SpawnEdge, CGX_VERSION,
};
use crate::diag::Diagnostic;
use std::collections::BTreeMap;

/// Builds a CGX document: imports from PLT stubs, local functions, call
/// edges, spawn edges synthesized from `pthread_create` constants, and the
/// recovered constants.
pub fn emit_cgx(view: &ElfView<'_>, scan: &CallScan, consts: &[ConstArg]) -> CgxDocument {
    let mut functions: BTreeMap<String, FunctionNode> = BTreeMap::new();
    for (addr, name) in &view.plt_stubs {
        functions.entry(name.clone()).or_insert(FunctionNode {
            id: name.clone(),
            name: name.clone(),
            addr: Some(*addr as u64),
            is_import: true,
        });
    }
    for f in &scan.functions {
        functions.insert(
            f.id.clone(),
            FunctionNode {
                id: f.id.clone(),
                name: f.name.clone(),
                addr: Some(f.addr as u64),
                is_import: false,
            },
        );
    }
    let mut local = |addr: u32| -> String {
        if let Some(f) = scan.function_at(addr) {
            return f.id.clone();
        }
        let id = format!("FUN_{addr:08x}");
        functions.entry(id.clone()).or_insert(FunctionNode {
            id: id.clone(),
            name: id.clone(),
            addr: Some(addr as u64),
            is_import: false,
        });
        id
    };

    let mut calls = Vec::with_capacity(scan.calls.len());
    for c in &scan.calls {
        let callee = if view.plt_stubs.contains_key(&c.target) {
            c.callee.clone()
        } else {
            local(c.target)
        };
        calls.push(CallEdge {
            caller: c.caller.clone(),
            callee,
            site: Site::Addr(c.site as u64),
            resolved_indirect: false,
        });
    }

    let mut spawns = Vec::new();
    for k in consts.iter().filter(|k| k.kind == ConstKind::Raw && k.arg_index == 2) {
        let (Site::Addr(site), Some(entry)) = (&k.site, k.value.as_int()) else {
            continue;
        };
        let Some(spawner) = scan.owner(*site as u32).map(|f| f.id.clone()) else {
            continue;
        };
        let entry = local(entry as u32 & !1);
        spawns.push(SpawnEdge {
            spawner,
            entry,
            site: k.site.clone(),
        });
    }

    let entry = match scan.owner(view.entry) {
        Some(f) => f.id.clone(),
        None => local(view.entry),
    };
    CgxDocument {
        cgx_version: CGX_VERSION,
        entry,
        functions: functions.into_values().collect(),
        calls,
        spawns,
        consts: consts.to_vec(),
    }
}

/// Result of the whole ELF pipeline.
#[derive(Debug, Clone)]
pub struct ElfIngest {
    pub document: CgxDocument,
    pub imports: Vec<String>,
    pub warnings: Vec<Diagnostic>,
}

/// parse, decode, recover constants and emit in one step.
pub fn ingest_elf(bytes: &[u8]) -> Result<ElfIngest, ElfError> {
    let view = parse_elf32(bytes)?;
    let scan = decode_calls(&view);
    let consts = recover_consts(&view, &scan);
    let document = emit_cgx(&view, &scan, &consts);
    let mut warnings = view.warnings.clone();
    warnings.extend(scan.warnings.iter().cloned());
    if !scan.from_symbols && !scan.functions.is_empty() {
        warnings.push(Diagnostic::info(
            "elf",
            format!("no function symbols; {} functions found heuristically", scan.functions.len()),
        ));
    }
    Ok(ElfIngest {
        imports: view.import_names(),
        document,
        warnings,
    })
}
