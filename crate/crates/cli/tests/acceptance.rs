//! Acceptance criteria AC1 to AC8. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use firmscope_core::callgraph::*;
use firmscope_core::carve::{self, verify_uimage, Digest};
use firmscope_core::elf::ingest_elf;
use firmscope_core::netmap::{tcp_scan, udp_probe, ScanConfig};
use firmscope_core::rules::Rules;
use firmscope_core::triage::{triage_inventory, walk_tree};
use firmscope_core::Category;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const AC1_MAX: Duration = Duration::from_secs(1);
const AC2_MAX: Duration = Duration::from_secs(5);
const AC2_MIN_DEDUP_RATIO: f64 = 10.0;
const AC3_GRAPHS: usize = 200;
const AC3_MAX_NODES: usize = 12;
const AC6_FUZZ_CASES: usize = 10_000;
const AC6_FUZZ_MAX_LEN: usize = 64 * 1024;
const AC6_STRIPPED_TOLERANCE: f64 = 0.10;
const AC7_MAX: Duration = Duration::from_secs(10);
const AC7_TIMEOUT_MS: u64 = 200;
const AC7_IN_FLIGHT: usize = 128;

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn fixture(rel: &str) -> PathBuf {
    root().join("fixtures").join(rel)
}

fn load_graph(name: &str) -> CallGraph {
    ingest_cgx(&std::fs::read_to_string(fixture(&format!("cgx/{name}"))).unwrap()).unwrap()
}

fn input_functions(cands: &[CandidatePoint]) -> BTreeSet<String> {
    cands
        .iter()
        .filter(|c| c.tier == "input")
        .map(|c| c.containing_function.clone())
        .collect()
}

fn ac1() -> Check {
    let start = Instant::now();
    let g = load_graph("noodles.cgx.json");
    let a = analyze(&g, &SinkCatalog::default(), ChainLimits::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let inputs = input_functions(&a.candidates);
    let want: BTreeSet<String> =
        ["FUN_00012b7c", "FUN_00014e68", "FUN_0001fc14"].map(String::from).into();
    ensure(inputs == want, format!("input candidate functions {inputs:?}"))?;

    let recv_callers = g.callers("FUN_00014e68").len();
    ensure(recv_callers == 5, format!("{recv_callers} call references into FUN_00014e68"))?;

    let fc14_callers = g.callers("FUN_0001fc14");
    ensure(fc14_callers.len() == 1, format!("FUN_0001fc14 callers {fc14_callers:?}"))?;
    let via = fc14_callers[0].to_string();
    let via_refs = g.callers(&via).len();
    ensure(via_refs == 3, format!("{via} referenced {via_refs} times"))?;

    let chains_2b7c: Vec<&InvocationChain> = a
        .enumerations
        .iter()
        .flat_map(|e| &e.chains)
        .filter(|c| c.candidate.containing_function == "FUN_00012b7c")
        .collect();
    ensure(
        !chains_2b7c.is_empty() && chains_2b7c.iter().all(|c| g.is_spawn_entry(&c.root)),
        "FUN_00012b7c chains not rooted at a spawn entry",
    )?;

    let services = a.ports.services();
    let want_ports: BTreeSet<(u16, Protocol)> =
        [(843, Protocol::Tcp), (1300, Protocol::Tcp), (5012, Protocol::Udp)].into();
    ensure(services == want_ports, format!("ports {services:?}"))?;
    ensure(elapsed < AC1_MAX, format!("took {elapsed:?}"))?;
    Ok(format!(
        "3 input functions, 5 refs into FUN_00014e68, FUN_0001fc14 via {via} (3 refs), ports 843/tcp 1300/tcp 5012/udp, {elapsed:.2?}"
    ))
}

fn ac2() -> Check {
    let start = Instant::now();
    let g = load_graph("apollo.cgx.json");
    let a = analyze(&g, &SinkCatalog::default(), ChainLimits::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let groups = a.threads.len();
    let services = a.ports.services().len();
    let sink_fns = input_functions(&a.candidates).len();
    let ratio = a.raw_candidates.len() as f64 / a.candidates.len() as f64;
    ensure(groups == 65, format!("{groups} thread groups"))?;
    ensure(services == 7, format!("{services} bindings"))?;
    ensure(sink_fns == 25, format!("{sink_fns} recv functions"))?;
    ensure(ratio >= AC2_MIN_DEDUP_RATIO, format!("dedup ratio {ratio:.1}"))?;
    ensure(elapsed < AC2_MAX, format!("took {elapsed:?}"))?;
    Ok(format!(
        "65 groups, 7 bindings, 25 recv functions, {} raw / {} deduped = {ratio:.1}x, {elapsed:.2?}",
        a.raw_candidates.len(),
        a.candidates.len()
    ))
}

/// All simple paths from `from` to `to` by breadth-first extension.
fn brute_paths(n: usize, edges: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::from([vec![from]]);
    while let Some(p) = queue.pop_front() {
        let last = *p.last().unwrap();
        if last == to {
            out.insert(p);
            continue;
        }
        for next in 0..n {
            if edges.contains(&(last, next)) && !p.contains(&next) {
                let mut q = p.clone();
                q.push(next);
                queue.push_back(q);
            }
        }
    }
    out
}

fn ac3() -> Check {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed_ac03);
    let name = |i: usize| format!("f{i:02}");
    let mut mismatches = 0;
    let mut total_chains = 0;
    for _ in 0..AC3_GRAPHS {
        let n = rng.gen_range(2..=AC3_MAX_NODES);
        let m = rng.gen_range(0..=n * 3);
        let edges: BTreeSet<(usize, usize)> =
            (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let target = rng.gen_range(0..n);
        let spawns: BTreeSet<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..n)).collect();

        let mut doc = CgxDocument {
            cgx_version: CGX_VERSION,
            entry: name(0),
            functions: (0..n)
                .map(|i| FunctionNode { id: name(i), name: name(i), addr: None, is_import: false })
                .chain([FunctionNode { id: "recv".into(), name: "recv".into(), addr: None, is_import: true }])
                .collect(),
            calls: edges
                .iter()
                .map(|&(a, b)| CallEdge {
                    caller: name(a),
                    callee: name(b),
                    site: Site::Synthetic(format!("c{a}_{b}")),
                    resolved_indirect: false,
                })
                .collect(),
            spawns: spawns
                .iter()
                .map(|&s| SpawnEdge { spawner: name(0), entry: name(s), site: Site::Synthetic(format!("s{s}")) })
                .collect(),
            consts: vec![],
        };
        doc.calls.push(CallEdge {
            caller: name(target),
            callee: "recv".into(),
            site: Site::Synthetic("sink".into()),
            resolved_indirect: false,
        });
        let text = serde_json::to_string(&doc).unwrap();
        let g = ingest_cgx(&text).map_err(|e| e.to_string())?;
        let cands = dedup_candidates(&find_candidates(&g, &SinkCatalog::default()));
        let limits = ChainLimits { max_depth: AC3_MAX_NODES, max_chains: usize::MAX };
        let got: BTreeSet<Vec<String>> = enumerate_chains(&g, &cands[0], limits)
            .map_err(|e| e.to_string())?
            .chains
            .into_iter()
            .map(|c| c.path)
            .collect();
        let mut want = BTreeSet::new();
        for r in std::iter::once(0).chain(spawns.iter().copied()) {
            for p in brute_paths(n, &edges, r, target) {
                want.insert(p.into_iter().map(name).collect::<Vec<_>>());
            }
        }
        total_chains += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} of {AC3_GRAPHS} graphs mismatched"))?;
    Ok(format!("{AC3_GRAPHS} graphs, {total_chains} chains, 0 mismatches"))
}

fn ac4() -> Check {
    let image = carve::load_image(&fixture("flash/flash.bin")).map_err(|e| e.to_string())?;
    ensure(image.size_bytes() == 8 << 20, "image is not 8 MiB")?;
    let table = carve::parse_offset_table(&std::fs::read_to_string(fixture("flash/layout.json")).unwrap())
        .map_err(|e| e.to_string())?;
    ensure(table.len() == 6, "layout does not declare 6 partitions")?;
    let result = carve::carve(&image, &carve::scan_magics(&image), Some(&table)).map_err(|e| e.to_string())?;
    carve::check_records(&result.records, image.size_bytes())?;

    let frozen: BTreeMap<String, String> = std::fs::read_to_string(fixture("flash/partitions.sha256"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(' ').map(|(h, n)| (n.trim().to_string(), h.to_string())))
        .collect();
    ensure(result.records.len() == 6, format!("{} records", result.records.len()))?;
    let out = tempfile::tempdir().unwrap();
    let manifest = carve::write_partitions(&image, &result, out.path()).map_err(|e| e.to_string())?;
    for p in &manifest.partitions {
        let label = p.record.label().to_string();
        let blob = std::fs::read(out.path().join(&p.file)).unwrap();
        let hex = Digest::of(&blob).to_hex();
        ensure(frozen.get(&label) == Some(&hex), format!("{label} digest {hex}"))?;
        ensure(
            Some(blob.as_slice()) == image.range(p.record.offset, p.record.length),
            format!("{label} differs from the source range"),
        )?;
    }

    let uimage = std::fs::read(fixture("flash/uimage.bin")).unwrap();
    let header = verify_uimage(&uimage).map_err(|e| e.to_string())?;
    ensure(header.checksum_ok(), "uImage CRC fails on the pristine fixture")?;
    let payload = carve::UIMAGE_HEADER_LEN..uimage.len();
    let mut undetected = 0;
    for i in payload.clone() {
        let mut flipped = uimage.clone();
        flipped[i] ^= 0x01;
        if verify_uimage(&flipped).map(|h| h.checksum_ok()).unwrap_or(false) {
            undetected += 1;
        }
    }
    ensure(undetected == 0, format!("{undetected} payload flips undetected"))?;
    Ok(format!(
        "6 partitions sha256-equal, disjoint and sorted; uImage CRC ok, {} single-byte flips all detected",
        payload.len()
    ))
}

fn ac5() -> Check {
    let inv = walk_tree(&fixture("rootfs")).map_err(|e| e.to_string())?;
    let findings = triage_inventory(&inv, &Rules::default());
    let count = |c: Category| findings.iter().filter(|f| f.category == c).count();
    let weak: Vec<_> = findings.iter().filter(|f| f.category == Category::WeakHash).collect();
    ensure(weak.len() == 1, format!("{} weak_hash findings", weak.len()))?;
    let hash = weak[0].evidence.excerpt.clone().unwrap_or_default();
    ensure(
        hash.len() == 13 && firmscope_core::creds::classify_hash(&hash).scheme
            == firmscope_core::creds::HashScheme::Descrypt,
        format!("weak hash '{hash}' is not 13-char descrypt"),
    )?;
    let creds = count(Category::PlaintextCredential);
    let updates = count(Category::UnsignedUpdatePath);
    let inits = count(Category::InitScript);
    ensure(creds >= 1, "no plaintext_credential")?;
    ensure(updates == 1, format!("{updates} unsigned_update_path"))?;
    ensure(inits >= 4, format!("{inits} init_script"))?;
    Ok(format!(
        "1 weak_hash (descrypt), {creds} plaintext_credential, 1 unsigned_update_path, {inits} init_script"
    ))
}

fn ac6() -> Check {
    let bytes = std::fs::read(fixture("elf/fixture.elf")).unwrap();
    let ingest = ingest_elf(&bytes).map_err(|e| e.to_string())?;
    let doc = &ingest.document;
    let got: BTreeSet<(String, String)> =
        doc.calls.iter().map(|c| (c.caller.clone(), c.callee.clone())).collect();
    let want: BTreeSet<(String, String)> = std::fs::read_to_string(fixture("elf/golden_edges.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(' ').map(|(a, b)| (a.to_string(), b.trim().to_string())))
        .collect();
    ensure(got == want, format!("edge sets differ: {:?}", got.symmetric_difference(&want).collect::<Vec<_>>()))?;

    let g = ingest_cgx(&serde_json::to_string(doc).unwrap()).map_err(|e| format!("emitted CGX invalid: {e}"))?;
    ensure(g.is_spawn_entry("multicast_thread"), "spawn entry multicast_thread not recovered")?;
    let ports = map_ports(&g).map_err(|e| e.to_string())?;
    ensure(
        ports.services().contains(&(5012, Protocol::Udp)),
        format!("port 5012 not recovered: {:?}", ports.services()),
    )?;

    // stripped build: same edge count within tolerance
    let stripped = ingest_elf(&std::fs::read(fixture("elf/fixture-stripped.elf")).unwrap()).map_err(|e| e.to_string())?;
    let ratio = stripped.document.calls.len() as f64 / want.len() as f64;
    ensure((ratio - 1.0).abs() <= AC6_STRIPPED_TOLERANCE, format!("stripped edge ratio {ratio:.2}"))?;

    let mut rng = rand::rngs::StdRng::seed_from_u64(0xac06);
    let mut crashes = 0;
    let mut accepted = 0;
    for i in 0..AC6_FUZZ_CASES {
        let len = rng.gen_range(0..=AC6_FUZZ_MAX_LEN);
        let mut buf = vec![0u8; len];
        rng.fill(buf.as_mut_slice());
        if i % 2 == 0 && len >= 52 {
            // valid ELF32 LE ARM identification so the parser goes deeper
            buf[..bytes.len().min(52)].copy_from_slice(&bytes[..52]);
            if i % 4 == 0 {
                let n = len.min(bytes.len());
                buf[..n].copy_from_slice(&bytes[..n]);
                for _ in 0..8 {
                    let at = rng.gen_range(0..n);
                    buf[at] = rng.gen();
                }
            }
        }
        match catch_unwind(AssertUnwindSafe(|| ingest_elf(&buf))) {
            Err(_) => crashes += 1,
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
        }
    }
    ensure(crashes == 0, format!("{crashes} fuzz inputs panicked"))?;
    Ok(format!(
        "{} edges equal golden, CGX valid, spawn + 5012/udp recovered, stripped ratio {ratio:.2}, {AC6_FUZZ_CASES} fuzz inputs ({accepted} parsed) no crash",
        want.len()
    ))
}

fn ac7() -> Check {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let listeners: Vec<_> = (0..3).map(|_| std::net::TcpListener::bind("127.0.0.1:0").unwrap()).collect();
        let mut tcp: Vec<u16> = listeners.iter().map(|l| l.local_addr().unwrap().port()).collect();
        tcp.sort();
        let sock = tokio::net::UdpSocket::bind("127.0.0.1:0").await.unwrap();
        let udp = sock.local_addr().unwrap().port();
        tokio::spawn(async move {
            let mut buf = [0u8; 512];
            while let Ok((n, from)) = sock.recv_from(&mut buf).await {
                let _ = sock.send_to(&buf[..n], from).await;
            }
        });

        let cfg = ScanConfig {
            timeout_ms: AC7_TIMEOUT_MS,
            max_in_flight: AC7_IN_FLIGHT,
            ..ScanConfig::default()
        };
        let mut universe: Vec<u16> = (1..=1024).collect();
        universe.extend(&tcp);
        let start = Instant::now();
        let t = tcp_scan("127.0.0.1", &universe, &cfg).await.map_err(|e| e.to_string())?;
        let u = udp_probe("127.0.0.1", &[udp], &BTreeMap::new(), &cfg).await.map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure(t.tcp_open == tcp, format!("open tcp {:?}, expected {tcp:?}", t.tcp_open))?;
        ensure(u.udp_responsive() == vec![udp], format!("udp states {:?}", u.udp_state))?;
        ensure(elapsed < AC7_MAX, format!("took {elapsed:?}"))?;
        drop(listeners);
        Ok(format!("3 tcp + 1 udp exactly, 1..1024 scanned in {elapsed:.2?}"))
    })
}

fn tree_digest(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn ac8() -> Check {
    let work = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = work.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_firmscope"))
            .current_dir(root())
            .env_remove("FIRMSCOPE_RULES")
            .args([
                "all", "--image", "fixtures/flash/flash.bin", "--table", "fixtures/flash/layout.json",
                "--tree", "fixtures/rootfs", "--cgx", "fixtures/cgx/noodles.cgx.json",
                "--cgx", "fixtures/cgx/apollo.cgx.json", "--reproducible", "--out",
            ])
            .arg(&out)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        (status.code(), tree_digest(&out))
    };
    let (c1, a) = run("first");
    let (c2, b) = run("second");
    ensure(c1 == Some(0) && c2 == Some(0), format!("exit codes {c1:?} {c2:?}"))?;
    ensure(a.len() > 10, format!("only {} files written", a.len()))?;
    let names_a: Vec<_> = a.keys().collect();
    let names_b: Vec<_> = b.keys().collect();
    ensure(names_a == names_b, "file sets differ")?;
    let differing: Vec<_> = a.iter().filter(|(k, v)| b.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    ensure(differing.is_empty(), format!("differing files {differing:?}"))?;
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn main() {
    // libtest flags such as --nocapture or a filter are accepted and ignored
    let criteria: [Criterion; 8] = [
        ("AC1", "noodles mirror", ac1),
        ("AC2", "apollo mirror", ac2),
        ("AC3", "chain oracle", ac3),
        ("AC4", "carving round-trip", ac4),
        ("AC5", "filesystem triage", ac5),
        ("AC6", "ELF ingest", ac6),
        ("AC7", "loopback netmap", ac7),
        ("AC8", "determinism", ac8),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let result = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("{id} PASS {title}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("{id} FAIL {title}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
