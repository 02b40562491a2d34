use super::parse::{ElfView, SymbolKind};
use crate::diag::Diagnostic;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Bl,
    BlxImm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DecodedCall {
    pub site: u32,
    /// Id of the containing function.
    pub caller: String,
    pub target: u32,
    pub kind: CallKind,
    /// Import name for PLT targets, otherwise the target function's id.
    pub callee: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElfFunction {
    pub id: String,
    pub name: String,
    pub addr: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallScan {
    /// Local functions sorted by address.
    pub functions: Vec<ElfFunction>,
    pub calls: Vec<DecodedCall>,
    pub from_symbols: bool,
    pub warnings: Vec<Diagnostic>,
}

impl CallScan {
    pub fn function_at(&self, addr: u32) -> Option<&ElfFunction> {
        self.functions
            .binary_search_by_key(&addr, |f| f.addr)
            .ok()
            .map(|i| &self.functions[i])
    }

    /// Greatest function start at or below `addr`.
    pub fn owner(&self, addr: u32) -> Option<&ElfFunction> {
        let i = self.functions.partition_point(|f| f.addr <= addr);
        i.checked_sub(1).map(|i| &self.functions[i])
    }
}

/// Decodes a direct call at `site`: BL (any condition but 0xF) or
/// BLX with an immediate target.
pub fn decode_word(word: u32, site: u32) -> Option<(CallKind, u32)> {
    let offset = (((word & 0x00ff_ffff) << 8) as i32 >> 6) as u32;
    let base = site.wrapping_add(8).wrapping_add(offset);
    if word & 0xfe00_0000 == 0xfa00_0000 {
        let h = (word >> 24) & 1;
        Some((CallKind::BlxImm, base.wrapping_add(h << 1)))
    } else if word & 0x0f00_0000 == 0x0b00_0000 && word >> 28 != 0xf {
        Some((CallKind::Bl, base))
    } else {
        None
    }
}

pub(crate) fn is_prologue(word: u32) -> bool {
    word & 0xffff_4000 == 0xe92d_4000
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Arm,
    Data,
    Thumb,
}

/// A32 words of every executable section outside the PLT, paired with
/// their addresses. Data and Thumb ranges marked by mapping symbols are
/// skipped.
pub(crate) fn arm_words<'a>(
    view: &'a ElfView<'a>,
    warnings: &mut Vec<Diagnostic>,
) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for sec in view.exec_sections() {
        let Some(data) = view.section_data(sec) else {
            continue;
        };
        let mut marks: BTreeMap<u32, Mode> = BTreeMap::new();
        for s in &view.symbols {
            if s.shndx as usize != sec.index || !sec.contains(s.value) {
                continue;
            }
            let mode = match s.name.as_bytes() {
                [b'$', b'a', ..] => Mode::Arm,
                [b'$', b'd', ..] => Mode::Data,
                [b'$', b't', ..] => Mode::Thumb,
                _ => continue,
            };
            marks.insert(s.value, mode);
        }
        let mut thumb_bytes = 0u64;
        let start = (4 - sec.addr % 4) % 4;
        let mut off = start as usize;
        while off + 4 <= data.len() {
            let addr = sec.addr.wrapping_add(off as u32);
            let mode = marks
                .range(..=addr)
                .next_back()
                .map(|(_, m)| *m)
                .unwrap_or(Mode::Arm);
            match mode {
                Mode::Arm => {
                    let w = u32::from_le_bytes([data[off], data[off + 1], data[off + 2], data[off + 3]]);
                    out.push((addr, w));
                }
                Mode::Thumb => thumb_bytes += 4,
                Mode::Data => {}
            }
            off += 4;
        }
        if thumb_bytes > 0 {
            warnings.push(Diagnostic::warning(
                "elf",
                format!("{}: {thumb_bytes} bytes of Thumb code skipped", sec.name),
            ));
        }
    }
    out
}

fn fun_id(addr: u32) -> String {
    format!("FUN_{addr:08x}")
}

fn in_code(view: &ElfView<'_>, addr: u32) -> bool {
    view.exec_sections().any(|s| s.contains(addr))
}

/// Discovers functions and decodes direct calls.
///
/// Function starts come from defined function symbols when there are any;
/// otherwise from call targets, prologue words and the entry point.
pub fn decode_calls(view: &ElfView<'_>) -> CallScan {
    let mut warnings = Vec::new();
    let words = arm_words(view, &mut warnings);
    let raw: Vec<(u32, CallKind, u32)> = words
        .iter()
        .filter_map(|&(site, w)| decode_word(w, site).map(|(k, t)| (site, k, t)))
        .collect();

    let mut named: BTreeMap<u32, String> = BTreeMap::new();
    for s in view.symbols.iter().chain(&view.dynsyms) {
        let addr = s.value & !1;
        if s.kind == SymbolKind::Func && s.is_defined() && !s.name.is_empty() && in_code(view, addr) {
            named.entry(addr).or_insert_with(|| s.name.clone());
        }
    }
    let from_symbols = !named.is_empty();
    if !from_symbols {
        let mut starts: BTreeSet<u32> = BTreeSet::new();
        starts.extend(words.iter().filter(|(_, w)| is_prologue(*w)).map(|(a, _)| *a));
        starts.extend(
            raw.iter()
                .filter(|(_, k, t)| *k == CallKind::Bl && !view.plt_stubs.contains_key(t) && in_code(view, *t))
                .map(|(_, _, t)| *t),
        );
        if in_code(view, view.entry) {
            starts.insert(view.entry);
        }
        named = starts.into_iter().map(|a| (a, fun_id(a))).collect();
    }

    let mut ids: BTreeSet<String> = view.import_names().into_iter().collect();
    let functions: Vec<ElfFunction> = named
        .into_iter()
        .map(|(addr, name)| {
            let mut id = name.clone();
            if !ids.insert(id.clone()) {
                id = format!("{name}@{addr:08x}");
                ids.insert(id.clone());
            }
            ElfFunction { id, name, addr }
        })
        .collect();

    let mut scan = CallScan {
        functions,
        calls: Vec::new(),
        from_symbols,
        warnings: Vec::new(),
    };
    let mut orphan_sites = 0usize;
    for (site, kind, target) in raw {
        let Some(caller) = scan.owner(site).map(|f| f.id.clone()) else {
            orphan_sites += 1;
            continue;
        };
        let callee = match view.plt_stubs.get(&target) {
            Some(name) => name.clone(),
            None => scan
                .function_at(target)
                .map(|f| f.id.clone())
                .unwrap_or_else(|| fun_id(target)),
        };
        scan.calls.push(DecodedCall {
            site,
            caller,
            target,
            kind,
            callee,
        });
    }
    if orphan_sites > 0 {
        warnings.push(Diagnostic::warning(
            "elf",
            format!("{orphan_sites} call sites precede the first known function"),
        ));
    }
    scan.warnings = warnings;
    scan
}
