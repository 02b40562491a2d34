use super::decode::{CallScan, DecodedCall};
use super::parse::{modified_imm, ElfView};
use crate::callgraph::{ConstArg, ConstConfidence, ConstKind, ConstValue, Site};
use std::collections::HashMap;

/// How far back from a call the argument set-up is searched.
const WINDOW: usize = 16;
const SP: u32 = 13;
const PC: u32 = 15;

/// Instruction words of one function, indexable by address.
struct Code<'v> {
    view: &'v ElfView<'v>,
    words: HashMap<u32, u32>,
}

enum Step {
    /// `reg` receives this value.
    Value(u32),
    /// `reg` receives the top half; keep looking for the low half.
    High(u16),
    /// `reg` is copied from another register.
    Copy(u32),
    /// `reg` is written in a way the heuristic does not follow.
    Clobbered,
    /// Control flow or call: stop.
    Barrier,
    Untouched,
}

fn cond_always(w: u32) -> bool {
    w >> 28 == 0xe
}

fn step(code: &Code<'_>, addr: u32, w: u32, reg: u32) -> Step {
    let rd = (w >> 12) & 0xf;
    // B, BL, BLX(imm)
    if w & 0x0e00_0000 == 0x0a00_0000 || w & 0xfe00_0000 == 0xfa00_0000 {
        return Step::Barrier;
    }
    // BX / BLX register
    if w & 0x0fff_ffd0 == 0x012f_ff10 {
        return Step::Barrier;
    }
    // LDM / POP
    if w & 0x0e10_0000 == 0x0810_0000 {
        return if w & (1 << reg) != 0 || w & (1 << PC) != 0 {
            Step::Barrier
        } else {
            Step::Untouched
        };
    }
    // MOVW
    if w & 0x0ff0_0000 == 0x0300_0000 && rd == reg {
        if !cond_always(w) {
            return Step::Clobbered;
        }
        return Step::Value(((w >> 4) & 0xf000) | (w & 0xfff));
    }
    // MOVT
    if w & 0x0ff0_0000 == 0x0340_0000 && rd == reg {
        if !cond_always(w) {
            return Step::Clobbered;
        }
        return Step::High((((w >> 4) & 0xf000) | (w & 0xfff)) as u16);
    }
    // MOV immediate
    if w & 0x0fef_0000 == 0x03a0_0000 && rd == reg {
        return if cond_always(w) {
            Step::Value(modified_imm(w))
        } else {
            Step::Clobbered
        };
    }
    // MOV register, no shift
    if w & 0x0fef_0ff0 == 0x01a0_0000 && rd == reg {
        return if cond_always(w) {
            Step::Copy(w & 0xf)
        } else {
            Step::Clobbered
        };
    }
    // LDR literal
    if w & 0x0f7f_0000 == 0x051f_0000 && rd == reg {
        if !cond_always(w) {
            return Step::Clobbered;
        }
        let pc = addr.wrapping_add(8);
        let off = w & 0xfff;
        let lit = if w & (1 << 23) != 0 {
            pc.wrapping_add(off)
        } else {
            pc.wrapping_sub(off)
        };
        return code.view.read_u32_va(lit).map_or(Step::Clobbered, Step::Value);
    }
    let class = (w >> 25) & 0x7;
    // multiplies write bits 19..16
    if w & 0x0fc0_00f0 == 0x0000_0090 {
        return if (w >> 16) & 0xf == reg {
            Step::Clobbered
        } else {
            Step::Untouched
        };
    }
    match class {
        // data processing; compares (opcode 10xx with S) write nothing
        0 | 1 => {
            let opcode = (w >> 21) & 0xf;
            let compare = (0x8..=0xb).contains(&opcode) && w & (1 << 20) != 0;
            // extra loads/stores: halfword and signed forms
            let extra = class == 0 && w & 0x90 == 0x90 && w & 0x60 != 0;
            if extra {
                return if w & (1 << 20) != 0 && rd == reg {
                    Step::Clobbered
                } else {
                    Step::Untouched
                };
            }
            if !compare && rd == reg {
                Step::Clobbered
            } else {
                Step::Untouched
            }
        }
        // single loads
        2 | 3 => {
            if w & (1 << 20) != 0 && rd == reg {
                Step::Clobbered
            } else {
                Step::Untouched
            }
        }
        _ => Step::Untouched,
    }
}

impl Code<'_> {
    /// Value of `reg` just before `at`, following register copies and
    /// MOVW/MOVT pairs within the window.
    fn reg_value(&self, at: u32, mut reg: u32, floor: u32) -> Option<u32> {
        let mut high: Option<u16> = None;
        let mut addr = at;
        for _ in 0..WINDOW {
            addr = addr.checked_sub(4).filter(|&a| a >= floor)?;
            let w = *self.words.get(&addr)?;
            match step(self, addr, w, reg) {
                Step::Value(v) => {
                    return Some(match high {
                        Some(h) => ((h as u32) << 16) | (v & 0xffff),
                        None => v,
                    })
                }
                Step::High(h) if high.is_none() => high = Some(h),
                Step::Copy(src) if high.is_none() && src != PC => reg = src,
                Step::Untouched => {}
                _ => return None,
            }
        }
        None
    }

    /// Base register and offset loaded into `reg` by `add reg, rn, #imm` or
    /// `sub reg, rn, #imm`.
    fn address_of(&self, at: u32, reg: u32, floor: u32) -> Option<(u32, i64, u32)> {
        let mut addr = at;
        for _ in 0..WINDOW {
            addr = addr.checked_sub(4).filter(|&a| a >= floor)?;
            let w = *self.words.get(&addr)?;
            let rd = (w >> 12) & 0xf;
            if rd == reg && cond_always(w) {
                let rn = (w >> 16) & 0xf;
                let imm = modified_imm(w) as i64;
                if w & 0x0fe0_0000 == 0x0280_0000 {
                    return Some((rn, imm, addr));
                }
                if w & 0x0fe0_0000 == 0x0240_0000 {
                    return Some((rn, -imm, addr));
                }
            }
            match step(self, addr, w, reg) {
                Step::Untouched => {}
                _ => return None,
            }
        }
        None
    }

    /// `strh rt, [base, #off]` in the window; returns the source register
    /// and the store address.
    fn halfword_store(&self, at: u32, base: u32, off: i64, floor: u32) -> Option<(u32, u32)> {
        let mut addr = at;
        for _ in 0..WINDOW {
            addr = addr.checked_sub(4).filter(|&a| a >= floor)?;
            let w = *self.words.get(&addr)?;
            if matches!(step(self, addr, w, base), Step::Barrier) {
                return None;
            }
            // STRH immediate, offset addressing (P=1, W=0, L=0)
            if w & 0x0f70_00f0 == 0x0140_00b0 && (w >> 16) & 0xf == base {
                let imm = (((w >> 4) & 0xf0) | (w & 0xf)) as i64;
                let imm = if w & (1 << 23) != 0 { imm } else { -imm };
                if imm == off {
                    return Some(((w >> 12) & 0xf, addr));
                }
            }
        }
        None
    }
}

fn heuristic(site: u32, arg_index: u32, value: ConstValue, kind: ConstKind) -> ConstArg {
    ConstArg {
        site: Site::Addr(site as u64),
        arg_index,
        value,
        kind,
        confidence: Some(ConstConfidence::Heuristic),
    }
}

fn import_name<'a>(view: &'a ElfView<'_>, call: &DecodedCall) -> Option<&'a str> {
    view.plt_stubs.get(&call.target).map(String::as_str)
}

/// Recovers constant arguments at `pthread_create`, `bind` and `socket`
/// call sites. Every result is marked heuristic.
pub fn recover_consts(view: &ElfView<'_>, scan: &CallScan) -> Vec<ConstArg> {
    let mut words = HashMap::new();
    let mut warnings = Vec::new();
    for (a, w) in super::decode::arm_words(view, &mut warnings) {
        words.insert(a, w);
    }
    let code = Code { view, words };
    let mut out = Vec::new();
    for call in &scan.calls {
        let floor = scan.owner(call.site).map(|f| f.addr).unwrap_or(0);
        match import_name(view, call) {
            Some("pthread_create") => {
                if let Some(entry) = code.reg_value(call.site, 2, floor) {
                    if view.exec_sections().any(|s| s.contains(entry & !1)) {
                        out.push(heuristic(call.site, 2, ConstValue::Int(entry as i64), ConstKind::Raw));
                    }
                }
            }
            Some("socket") => {
                let proto = match code.reg_value(call.site, 1, floor).map(|t| t & 0xf) {
                    Some(1) => "tcp",
                    Some(2) => "udp",
                    _ => continue,
                };
                out.push(heuristic(call.site, 1, ConstValue::Text(proto.into()), ConstKind::Protocol));
            }
            Some("bind") => {
                let Some((base, off, _)) = code.address_of(call.site, 1, floor) else {
                    continue;
                };
                if base != SP && base != 11 {
                    continue;
                }
                let Some((rt, store)) = code.halfword_store(call.site, base, off + 2, floor) else {
                    continue;
                };
                let Some(raw) = code.reg_value(store, rt, floor) else {
                    continue;
                };
                let port = (raw as u16).swap_bytes();
                if port != 0 {
                    out.push(heuristic(call.site, 1, ConstValue::Int(port as i64), ConstKind::Port));
                }
            }
            _ => {}
        }
    }
    out.sort();
    out
}
