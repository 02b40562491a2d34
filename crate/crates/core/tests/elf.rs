use firmscope_core::callgraph::{ingest_cgx, map_ports, ConstKind, ConstValue, Protocol, Site};
use firmscope_core::elf::*;
use rand::{Rng, SeedableRng};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/elf").join(name)
}

fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

fn golden_edges() -> BTreeSet<(String, String)> {
    std::fs::read_to_string(fixture("golden_edges.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

fn edges(scan: &CallScan) -> BTreeSet<(String, String)> {
    scan.calls.iter().map(|c| (c.caller.clone(), c.callee.clone())).collect()
}

#[test]
fn bl_target_table() {
    // (word, site, kind, target); targets cross-checked with an independent disassembler
    let table = [
        (0xeb00_0000u32, 0x8000u32, CallKind::Bl, 0x8008u32),
        (0xebff_fffe, 0x8000, CallKind::Bl, 0x8000),
        (0xeb00_007d, 0x20374, CallKind::Bl, 0x20570),
        (0xebff_ffff, 0x10000, CallKind::Bl, 0x10004),
        (0x0b7f_ffff, 0x0, CallKind::Bl, 0x0200_0004),
        (0xeb80_0000, 0x0400_0000, CallKind::Bl, 0x0200_0008),
    ];
    for (w, site, kind, target) in table {
        assert_eq!(decode_word(w, site), Some((kind, target)), "{w:#010x} @ {site:#x}");
    }
    assert_eq!(decode_word(0xfa00_0010, 0x9000), Some((CallKind::BlxImm, 0x9048)));
    assert_eq!(decode_word(0xfb00_0010, 0x9000), Some((CallKind::BlxImm, 0x904a)));
}

#[test]
fn fixture_imports_match_golden() {
    let bytes = read("fixture.elf");
    let view = parse_elf32(&bytes).unwrap();
    let golden: Vec<String> = std::fs::read_to_string(fixture("golden_imports.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(view.import_names(), golden);
    for name in ["recv", "pthread_create", "bind", "socket"] {
        assert!(golden.iter().any(|g| g == name));
    }
    assert!(view.warnings.is_empty(), "{:?}", view.warnings);
}

#[test]
fn fixture_edges_match_golden() {
    let bytes = read("fixture.elf");
    let view = parse_elf32(&bytes).unwrap();
    let scan = decode_calls(&view);
    assert!(scan.from_symbols);
    assert_eq!(edges(&scan), golden_edges());
}

#[test]
fn fixture_cgx_validates_with_consts() {
    let out = ingest_elf(&read("fixture.elf")).unwrap();
    let json = serde_json::to_string(&out.document).unwrap();
    let g = ingest_cgx(&json).unwrap();
    assert_eq!(g.entry(), "main");

    let spawns: Vec<_> = g.spawns().iter().map(|s| (s.spawner.as_str(), s.entry.as_str())).collect();
    assert_eq!(spawns, [("main", "multicast_thread")]);

    let port_consts: BTreeSet<i64> = g
        .consts()
        .iter()
        .filter(|c| c.kind == ConstKind::Port)
        .filter_map(|c| c.value.as_int())
        .collect();
    // open_socket's port arrives at run time and is not recovered
    assert_eq!(port_consts, BTreeSet::from([1300, 5012]));
    assert!(g.consts().iter().all(|c| c.is_heuristic()));
    assert!(g.consts().iter().any(|c| c.kind == ConstKind::Protocol
        && c.value == ConstValue::Text("udp".into())));

    let map = map_ports(&g).unwrap();
    let got: BTreeSet<_> = map
        .bindings
        .iter()
        .map(|b| (b.thread_root.as_str(), b.port, b.protocol))
        .collect();
    assert_eq!(
        got,
        BTreeSet::from([("main", 1300, Protocol::Tcp), ("multicast_thread", 5012, Protocol::Udp)])
    );
    let site_5012 = &map.bindings.iter().find(|b| b.port == 5012).unwrap().bind_site;
    assert_eq!(*site_5012, Site::Addr(0x20478));
}

#[test]
fn stripped_fixture_within_ten_percent() {
    let bytes = read("fixture-stripped.elf");
    let view = parse_elf32(&bytes).unwrap();
    assert!(view.symbols.is_empty());
    let scan = decode_calls(&view);
    assert!(!scan.from_symbols);
    let starts: Vec<u32> = scan.functions.iter().map(|f| f.addr).collect();
    assert_eq!(starts, [0x20358, 0x20428, 0x204cc, 0x20530]);

    let golden = golden_edges().len() as f64;
    let got = edges(&scan).len() as f64;
    assert!((got - golden).abs() / golden <= 0.10, "{got} vs {golden}");

    let out = ingest_elf(&bytes).unwrap();
    let g = ingest_cgx(&serde_json::to_string(&out.document).unwrap()).unwrap();
    assert_eq!(g.entry(), "FUN_00020358");
    assert_eq!(g.spawns()[0].entry, "FUN_00020428");
}

#[test]
fn rejects_foreign_formats() {
    assert_eq!(parse_elf32(b"MZ\x90\x00\x03\x00").unwrap_err(), ElfError::NotElf);
    let mut elf64 = read("fixture.elf");
    elf64[4] = 2;
    assert_eq!(parse_elf32(&elf64).unwrap_err(), ElfError::WrongClass(2));
}

/// Minimal ELF32 ARM image: .text, a GNU-layout .plt, .rel.plt, .dynsym,
/// .dynstr and .shstrtab. No static symbols.
fn synthetic_elf(text: &[u32], imports: &[&str]) -> Vec<u8> {
    const TEXT: u32 = 0x8000;
    const PLT: u32 = 0x9000;
    const GOT: u32 = 0xa000;
    let words = |ws: &[u32]| ws.iter().flat_map(|w| w.to_le_bytes()).collect::<Vec<u8>>();

    let mut plt = vec![0xe52de004u32, 0xe59fe004, 0xe08fe00e, 0xe5bef008, 0];
    for i in 0..imports.len() as u32 {
        let stub = PLT + 20 + 12 * i;
        let slot = GOT + 4 * i;
        let back = (stub + 8 + 0x1000) - slot;
        plt.extend([0xe28fc600, 0xe28cca01, 0xe53cf000 | back]);
    }
    let mut dynstr = vec![0u8];
    let mut dynsym = vec![0u8; 16];
    let mut rel = Vec::new();
    for (i, name) in imports.iter().enumerate() {
        let off = dynstr.len() as u32;
        dynstr.extend(name.as_bytes());
        dynstr.push(0);
        let mut sym = [0u8; 16];
        sym[..4].copy_from_slice(&off.to_le_bytes());
        sym[12] = 0x12;
        dynsym.extend(sym);
        rel.extend((GOT + 4 * i as u32).to_le_bytes());
        rel.extend((((i as u32 + 1) << 8) | 22).to_le_bytes());
    }
    let names = ["", ".text", ".plt", ".rel.plt", ".dynsym", ".dynstr", ".shstrtab"];
    let mut shstr = vec![0u8];
    let mut name_off = vec![0u32];
    for n in &names[1..] {
        name_off.push(shstr.len() as u32);
        shstr.extend(n.as_bytes());
        shstr.push(0);
    }
    // (type, flags, addr, data, link, entsize)
    let secs: Vec<(u32, u32, u32, Vec<u8>, u32, u32)> = vec![
        (0, 0, 0, vec![], 0, 0),
        (1, 6, TEXT, words(text), 0, 0),
        (1, 6, PLT, words(&plt), 0, 0),
        (9, 2, 0, rel, 4, 8),
        (11, 2, 0, dynsym, 5, 16),
        (3, 2, 0, dynstr, 0, 0),
        (3, 0, 0, shstr, 0, 0),
    ];
    let mut out = vec![0u8; 52];
    let mut headers = Vec::new();
    for (i, (kind, flags, addr, data, link, entsize)) in secs.iter().enumerate() {
        while !out.len().is_multiple_of(4) {
            out.push(0);
        }
        let offset = if i == 0 { 0 } else { out.len() as u32 };
        out.extend(data);
        for v in [name_off[i], *kind, *flags, *addr, offset, data.len() as u32, *link, 0, 4, *entsize] {
            headers.extend(v.to_le_bytes());
        }
    }
    while !out.len().is_multiple_of(4) {
        out.push(0);
    }
    let shoff = out.len() as u32;
    out.extend(headers);
    out[..4].copy_from_slice(b"\x7fELF");
    out[4] = 1;
    out[5] = 1;
    out[6] = 1;
    out[16..18].copy_from_slice(&2u16.to_le_bytes());
    out[18..20].copy_from_slice(&40u16.to_le_bytes());
    out[20..24].copy_from_slice(&1u32.to_le_bytes());
    out[24..28].copy_from_slice(&TEXT.to_le_bytes());
    out[32..36].copy_from_slice(&shoff.to_le_bytes());
    out[40..42].copy_from_slice(&52u16.to_le_bytes());
    out[46..48].copy_from_slice(&40u16.to_le_bytes());
    out[48..50].copy_from_slice(&(secs.len() as u16).to_le_bytes());
    out[50..52].copy_from_slice(&6u16.to_le_bytes());
    out
}

#[test]
fn gnu_plt_stride_layout() {
    // push {fp, lr}; bl recv@plt; bl system@plt; pop {fp, pc}
    let bl = |site: u32, target: u32| 0xeb00_0000 | ((target.wrapping_sub(site + 8) >> 2) & 0x00ff_ffff);
    let text = [0xe92d4800, bl(0x8004, 0x9014 + 12), bl(0x8008, 0x9014 + 24), 0xe8bd8800];
    let bytes = synthetic_elf(&text, &["memcpy", "recv", "system"]);
    let view = parse_elf32(&bytes).unwrap();
    let stubs: Vec<_> = view.plt_stubs.iter().map(|(a, n)| (*a, n.as_str())).collect();
    assert_eq!(stubs, [(0x9014, "memcpy"), (0x9020, "recv"), (0x902c, "system")]);
    let scan = decode_calls(&view);
    assert_eq!(
        edges(&scan),
        BTreeSet::from([
            ("FUN_00008000".to_string(), "recv".to_string()),
            ("FUN_00008000".to_string(), "system".to_string())
        ])
    );
}

#[test]
fn empty_text_gives_imports_only() {
    let bytes = synthetic_elf(&[], &["recv", "bind"]);
    let out = ingest_elf(&bytes).unwrap();
    let g = ingest_cgx(&serde_json::to_string(&out.document).unwrap()).unwrap();
    assert!(g.calls().is_empty());
    let locals: Vec<_> = g.functions().iter().filter(|f| !f.is_import).map(|f| f.id.as_str()).collect();
    // only the synthetic entry node the schema requires
    assert_eq!(locals, ["FUN_00008000"]);
    assert_eq!(out.imports, ["bind", "recv"]);
}

#[test]
fn fuzz_buffers_never_crash() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let base = read("fixture.elf");
    let mut parsed = 0;
    for i in 0..10_000 {
        let buf: Vec<u8> = match i % 4 {
            // random bytes
            0 => {
                let mut b = vec![0u8; rng.gen_range(0..=64 * 1024)];
                rng.fill(&mut b[..]);
                b
            }
            // valid ident, random remainder
            1 => {
                let mut b = vec![0u8; rng.gen_range(52..=64 * 1024)];
                rng.fill(&mut b[..]);
                b[..4].copy_from_slice(b"\x7fELF");
                b[4] = 1;
                b[5] = 1;
                b[18] = 40;
                b[19] = 0;
                b
            }
            // byte flips in the fixture
            2 => {
                let mut b = base.clone();
                for _ in 0..rng.gen_range(1..16) {
                    let at = rng.gen_range(0..b.len());
                    b[at] = rng.gen();
                }
                b
            }
            // truncated fixture
            _ => base[..rng.gen_range(0..base.len())].to_vec(),
        };
        if let Ok(out) = ingest_elf(&buf) {
            parsed += 1;
            let json = serde_json::to_string(&out.document).unwrap();
            ingest_cgx(&json).unwrap_or_else(|e| panic!("case {i}: emitted CGX rejected: {e}"));
        }
    }
    assert!(parsed > 0);
}
