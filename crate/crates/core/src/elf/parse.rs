use crate::diag::Diagnostic;
use std::collections::BTreeMap;

const EM_ARM: u16 = 40;
const SHT_SYMTAB: u32 = 2;
const SHT_NOBITS: u32 = 8;
const SHT_REL: u32 = 9;
const SHT_DYNSYM: u32 = 11;
pub(crate) const SHF_ALLOC: u32 = 0x2;
pub(crate) const SHF_EXECINSTR: u32 = 0x4;
const R_ARM_JUMP_SLOT: u32 = 22;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ElfError {
    #[error("not an ELF file")]
    NotElf,
    #[error("buffer too small for an ELF32 header ({0} bytes)")]
    TooSmall(usize),
    #[error("unsupported ELF class {0} (only 32-bit is supported)")]
    WrongClass(u8),
    #[error("unsupported data encoding {0} (only little-endian is supported)")]
    WrongEncoding(u8),
    #[error("unsupported machine {0} (only ARM is supported)")]
    WrongMachine(u16),
    #[error("truncated {0}")]
    Truncated(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElfSection {
    pub index: usize,
    pub name: String,
    pub kind: u32,
    pub flags: u32,
    pub addr: u32,
    pub offset: u32,
    pub size: u32,
    pub link: u32,
    pub entsize: u32,
}

impl ElfSection {
    pub fn is_exec(&self) -> bool {
        self.flags & SHF_EXECINSTR != 0
    }

    pub fn contains(&self, va: u32) -> bool {
        va >= self.addr && va - self.addr < self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    NoType,
    Object,
    Func,
    Other(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElfSymbol {
    pub name: String,
    pub value: u32,
    pub size: u32,
    pub kind: SymbolKind,
    pub shndx: u16,
}

impl ElfSymbol {
    pub fn is_defined(&self) -> bool {
        self.shndx != 0 && self.shndx < 0xff00
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PltReloc {
    pub got_slot: u32,
    pub symbol: String,
}

/// Parsed view over an ELF32 little-endian ARM image.
#[derive(Debug, Clone)]
pub struct ElfView<'a> {
    bytes: &'a [u8],
    pub entry: u32,
    pub sections: Vec<ElfSection>,
    pub symbols: Vec<ElfSymbol>,
    pub dynsyms: Vec<ElfSymbol>,
    pub plt_relocs: Vec<PltReloc>,
    /// PLT stub address to import name.
    pub plt_stubs: BTreeMap<u32, String>,
    pub warnings: Vec<Diagnostic>,
}

fn u16_at(b: &[u8], off: usize) -> Option<u16> {
    b.get(off..off.checked_add(2)?)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
}

fn u32_at(b: &[u8], off: usize) -> Option<u32> {
    b.get(off..off.checked_add(4)?)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

fn cstr(b: &[u8], off: usize) -> Option<String> {
    let tail = b.get(off..)?;
    let end = tail.iter().position(|&c| c == 0)?;
    Some(String::from_utf8_lossy(&tail[..end]).into_owned())
}

fn truncated(what: impl Into<String>) -> ElfError {
    ElfError::Truncated(what.into())
}

/// A32 modified immediate: imm8 rotated right by twice the rotate field.
pub(crate) fn modified_imm(w: u32) -> u32 {
    (w & 0xff).rotate_right(((w >> 8) & 0xf) * 2)
}

/// GOT slot loaded by a PLT stub `add ip, pc, #a; add ip, ip, #b;
/// ldr pc, [ip, #c]!` starting at `addr`.
pub(crate) fn plt_stub_slot(words: [u32; 3], addr: u32) -> Option<u32> {
    let [w0, w1, w2] = words;
    if w0 & 0x0fff_f000 != 0x028f_c000
        || w1 & 0x0fff_f000 != 0x028c_c000
        || w2 & 0x0f7f_f000 != 0x053c_f000
    {
        return None;
    }
    let ip = addr
        .wrapping_add(8)
        .wrapping_add(modified_imm(w0))
        .wrapping_add(modified_imm(w1));
    let off = w2 & 0xfff;
    Some(if w2 & (1 << 23) != 0 {
        ip.wrapping_add(off)
    } else {
        ip.wrapping_sub(off)
    })
}

impl<'a> ElfView<'a> {
    pub fn bytes(&self) -> &'a [u8] {
        self.bytes
    }

    pub fn section(&self, name: &str) -> Option<&ElfSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// File contents of a section, or `None` for NOBITS.
    pub fn section_data(&self, s: &ElfSection) -> Option<&'a [u8]> {
        if s.kind == SHT_NOBITS {
            return None;
        }
        let start = s.offset as usize;
        self.bytes.get(start..start.checked_add(s.size as usize)?)
    }

    /// Reads a little-endian word at a virtual address inside a loaded section.
    pub fn read_u32_va(&self, va: u32) -> Option<u32> {
        let s = self.sections.iter().find(|s| {
            s.flags & SHF_ALLOC != 0 && s.kind != SHT_NOBITS && s.contains(va) && s.size - (va - s.addr) >= 4
        })?;
        u32_at(self.section_data(s)?, (va - s.addr) as usize)
    }

    pub fn exec_sections(&self) -> impl Iterator<Item = &ElfSection> {
        let plt = self.section(".plt").map(|s| s.index);
        self.sections
            .iter()
            .filter(move |s| s.is_exec() && Some(s.index) != plt && s.kind != SHT_NOBITS)
    }

    pub fn import_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.plt_stubs.values().cloned().collect();
        names.sort();
        names.dedup();
        names
    }
}

fn read_symbols(
    bytes: &[u8],
    sections: &[ElfSection],
    table: &ElfSection,
    what: &str,
) -> Result<Vec<ElfSymbol>, ElfError> {
    let data = bytes
        .get(table.offset as usize..(table.offset as usize).saturating_add(table.size as usize))
        .ok_or_else(|| truncated(format!("{what} symbol table")))?;
    let strtab = sections
        .get(table.link as usize)
        .ok_or_else(|| truncated(format!("{what} string table link")))?;
    let strs = bytes
        .get(strtab.offset as usize..(strtab.offset as usize).saturating_add(strtab.size as usize))
        .ok_or_else(|| truncated(format!("{what} string table")))?;
    let mut out = Vec::with_capacity(data.len() / 16);
    for chunk in data.chunks_exact(16) {
        let name_off = u32_at(chunk, 0).unwrap_or(0) as usize;
        let info = chunk[12];
        out.push(ElfSymbol {
            name: cstr(strs, name_off).unwrap_or_default(),
            value: u32_at(chunk, 4).unwrap_or(0),
            size: u32_at(chunk, 8).unwrap_or(0),
            kind: match info & 0xf {
                0 => SymbolKind::NoType,
                1 => SymbolKind::Object,
                2 => SymbolKind::Func,
                k => SymbolKind::Other(k),
            },
            shndx: u16_at(chunk, 14).unwrap_or(0),
        });
    }
    Ok(out)
}

/// Parses headers, sections, symbol tables and PLT relocations, and maps
/// PLT stubs to import names.
pub fn parse_elf32(bytes: &[u8]) -> Result<ElfView<'_>, ElfError> {
    if bytes.len() < 4 || &bytes[..4] != b"\x7fELF" {
        return Err(ElfError::NotElf);
    }
    if bytes.len() < 52 {
        return Err(ElfError::TooSmall(bytes.len()));
    }
    if bytes[4] != 1 {
        return Err(ElfError::WrongClass(bytes[4]));
    }
    if bytes[5] != 1 {
        return Err(ElfError::WrongEncoding(bytes[5]));
    }
    let machine = u16_at(bytes, 18).unwrap_or(0);
    if machine != EM_ARM {
        return Err(ElfError::WrongMachine(machine));
    }
    let entry = u32_at(bytes, 24).unwrap_or(0);
    let shoff = u32_at(bytes, 32).unwrap_or(0) as usize;
    let shentsize = u16_at(bytes, 46).unwrap_or(0) as usize;
    let shnum = u16_at(bytes, 48).unwrap_or(0) as usize;
    let shstrndx = u16_at(bytes, 50).unwrap_or(0) as usize;

    let mut sections = Vec::with_capacity(shnum);
    if shnum > 0 {
        if shentsize < 40 {
            return Err(truncated("section header entries"));
        }
        let table_end = shentsize
            .checked_mul(shnum)
            .and_then(|n| n.checked_add(shoff))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| truncated("section header table"))?;
        let _ = table_end;
        for i in 0..shnum {
            let h = &bytes[shoff + i * shentsize..shoff + i * shentsize + 40];
            let field = |n: usize| u32_at(h, n * 4).unwrap_or(0);
            sections.push(ElfSection {
                index: i,
                name: String::new(),
                kind: field(1),
                flags: field(2),
                addr: field(3),
                offset: field(4),
                size: field(5),
                link: field(6),
                entsize: field(9),
            });
        }
        if let Some(shstr) = sections.get(shstrndx).cloned() {
            let strs = bytes.get(
                shstr.offset as usize..(shstr.offset as usize).saturating_add(shstr.size as usize),
            );
            let Some(strs) = strs else {
                return Err(truncated("section name table"));
            };
            for i in 0..shnum {
                let h = &bytes[shoff + i * shentsize..];
                let off = u32_at(h, 0).unwrap_or(0) as usize;
                sections[i].name = cstr(strs, off).unwrap_or_default();
            }
        }
        for s in &sections {
            if s.kind != SHT_NOBITS && s.kind != 0 {
                let end = (s.offset as u64) + (s.size as u64);
                if end > bytes.len() as u64 {
                    return Err(truncated(format!("section {}", s.name)));
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let symbols = match sections.iter().find(|s| s.kind == SHT_SYMTAB) {
        Some(t) => read_symbols(bytes, &sections, t, "static")?,
        None => Vec::new(),
    };
    let dynsym_idx = sections.iter().position(|s| s.kind == SHT_DYNSYM);
    let dynsyms = match dynsym_idx {
        Some(i) => read_symbols(bytes, &sections, &sections[i], "dynamic")?,
        None => Vec::new(),
    };

    let mut plt_relocs = Vec::new();
    for rel in sections.iter().filter(|s| s.kind == SHT_REL) {
        let data = &bytes[rel.offset as usize..rel.offset as usize + rel.size as usize];
        let symtab = match sections.get(rel.link as usize) {
            Some(s) if Some(s.index) == dynsym_idx => &dynsyms,
            Some(s) if s.kind == SHT_SYMTAB => &symbols,
            _ => continue,
        };
        for r in data.chunks_exact(8) {
            let info = u32_at(r, 4).unwrap_or(0);
            if info & 0xff != R_ARM_JUMP_SLOT {
                continue;
            }
            let Some(sym) = symtab.get((info >> 8) as usize) else {
                return Err(truncated(format!("relocation symbol index in {}", rel.name)));
            };
            if sym.name.is_empty() {
                warnings.push(Diagnostic::warning(
                    "elf",
                    format!("unnamed PLT relocation in {} ignored", rel.name),
                ));
                continue;
            }
            plt_relocs.push(PltReloc {
                got_slot: u32_at(r, 0).unwrap_or(0),
                symbol: sym.name.clone(),
            });
        }
    }

    let mut view = ElfView {
        bytes,
        entry,
        sections,
        symbols,
        dynsyms,
        plt_relocs,
        plt_stubs: BTreeMap::new(),
        warnings: Vec::new(),
    };
    map_plt(&mut view, &mut warnings);
    view.warnings = warnings;
    Ok(view)
}

fn map_plt(view: &mut ElfView<'_>, warnings: &mut Vec<Diagnostic>) {
    let Some(plt) = view.section(".plt").cloned() else {
        if !view.plt_relocs.is_empty() {
            warnings.push(Diagnostic::warning("elf", "PLT relocations present but no .plt section"));
        }
        return;
    };
    let Some(data) = view.section_data(&plt) else {
        return;
    };
    let stub_at = |addr: u32| -> Option<u32> {
        let off = addr.checked_sub(plt.addr)? as usize;
        let w = |i: usize| u32_at(data, off + 4 * i);
        plt_stub_slot([w(0)?, w(1)?, w(2)?], addr)
    };

    // standard GNU layout: 20-byte header, then 12-byte stubs in relocation order
    let stride: Option<Vec<(u32, String)>> = view
        .plt_relocs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let addr = plt.addr.checked_add(20 + 12 * i as u32)?;
            (stub_at(addr)? == r.got_slot).then(|| (addr, r.symbol.clone()))
        })
        .collect();
    if let Some(stubs) = stride.filter(|s| !s.is_empty()) {
        view.plt_stubs = stubs.into_iter().collect();
        return;
    }

    let by_slot: BTreeMap<u32, &str> = view
        .plt_relocs
        .iter()
        .map(|r| (r.got_slot, r.symbol.as_str()))
        .collect();
    let mut stubs = BTreeMap::new();
    for off in (0..data.len().saturating_sub(11)).step_by(4) {
        let addr = plt.addr.wrapping_add(off as u32);
        if let Some(name) = stub_at(addr).and_then(|slot| by_slot.get(&slot)) {
            stubs.insert(addr, name.to_string());
        }
    }
    let matched: std::collections::BTreeSet<&String> = stubs.values().collect();
    for r in &view.plt_relocs {
        if !matched.contains(&r.symbol) {
            warnings.push(Diagnostic::warning(
                "elf",
                format!("no PLT stub found for import {}", r.symbol),
            ));
        }
    }
    view.plt_stubs = stubs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_elf_and_wrong_class() {
        assert_eq!(parse_elf32(b"MZ\x90\x00").unwrap_err(), ElfError::NotElf);
        let mut h = vec![0u8; 64];
        h[..4].copy_from_slice(b"\x7fELF");
        h[4] = 2;
        h[5] = 1;
        assert_eq!(parse_elf32(&h).unwrap_err(), ElfError::WrongClass(2));
        h[4] = 1;
        h[18] = 3;
        assert_eq!(parse_elf32(&h).unwrap_err(), ElfError::WrongMachine(3));
        assert_eq!(parse_elf32(&h[..20]).unwrap_err(), ElfError::TooSmall(20));
    }

    #[test]
    fn modified_immediates() {
        assert_eq!(modified_imm(0xe28fc600), 0);
        assert_eq!(modified_imm(0xe28cca20), 0x20000);
        assert_eq!(modified_imm(0x000000ff), 0xff);
        assert_eq!(modified_imm(0x00000f01), 4);
    }

    #[test]
    fn gnu_stub_slot() {
        // add ip, pc, #0, 12 ; add ip, ip, #0x10000 ; ldr pc, [ip, #0xa8c]!
        let slot = plt_stub_slot([0xe28fc600, 0xe28cca10, 0xe5bcfa8c], 0x8314);
        assert_eq!(slot, Some(0x8314 + 8 + 0x10000 + 0xa8c));
        assert_eq!(plt_stub_slot([0xe52de004, 0xe28cca10, 0xe5bcfa8c], 0), None);
    }
}
