use firmscope_core::callgraph::{ingest_cgx, map_ports, Protocol, ServiceBinding, Site};
use firmscope_core::netmap::*;
use std::collections::{BTreeMap, BTreeSet};
use std::net::{TcpListener, UdpSocket as StdUdp};
use std::path::Path;
use std::time::{Duration, Instant};
use tokio::net::UdpSocket;

const HOST: &str = "127.0.0.1";

fn cfg(timeout_ms: u64, max_in_flight: usize) -> ScanConfig {
    ScanConfig {
        timeout_ms,
        max_in_flight,
        ..ScanConfig::default()
    }
}

fn tcp_listeners(n: usize) -> (Vec<TcpListener>, Vec<u16>) {
    let ls: Vec<TcpListener> = (0..n).map(|_| TcpListener::bind((HOST, 0)).unwrap()).collect();
    let mut ports: Vec<u16> = ls.iter().map(|l| l.local_addr().unwrap().port()).collect();
    ports.sort();
    (ls, ports)
}

/// Echoes every datagram; if `expect` is set, only replies to that payload.
async fn udp_echo(expect: Option<Vec<u8>>) -> u16 {
    let sock = UdpSocket::bind((HOST, 0)).await.unwrap();
    let port = sock.local_addr().unwrap().port();
    tokio::spawn(async move {
        let mut buf = [0u8; 1024];
        loop {
            let Ok((n, from)) = sock.recv_from(&mut buf).await else { return };
            if expect.as_deref().is_none_or(|e| e == &buf[..n]) {
                let _ = sock.send_to(&buf[..n], from).await;
            }
        }
    });
    port
}

fn free_udp_port() -> u16 {
    StdUdp::bind((HOST, 0)).unwrap().local_addr().unwrap().port()
}

fn low_range_plus(extra: &[u16]) -> Vec<u16> {
    let mut v: Vec<u16> = (1..=1024).collect();
    v.extend(extra);
    v
}

#[tokio::test(flavor = "multi_thread")]
async fn tcp_scan_finds_exactly_the_listeners() {
    let (_ls, ports) = tcp_listeners(2);
    let r = tcp_scan(HOST, &low_range_plus(&ports), &cfg(200, 128)).await.unwrap();
    assert_eq!(r.tcp_open, ports);
}

#[tokio::test(flavor = "multi_thread")]
async fn tcp_scan_rejects_bad_input() {
    assert!(matches!(tcp_scan(HOST, &[], &cfg(200, 8)).await, Err(ScanError::NoPorts)));
    assert!(matches!(tcp_scan(HOST, &[80], &cfg(0, 8)).await, Err(ScanError::Timeout)));
    assert!(matches!(tcp_scan(HOST, &[80], &cfg(10, 0)).await, Err(ScanError::Concurrency)));
    assert!(matches!(
        tcp_scan("8.8.8.8", &[53], &cfg(10, 1)).await,
        Err(ScanError::OutOfScope(_))
    ));
    assert!(matches!(
        tcp_scan("no-such-host.invalid", &[80], &cfg(10, 1)).await,
        Err(ScanError::Resolve(_))
    ));
}

#[tokio::test(flavor = "multi_thread")]
async fn closed_port_absent() {
    let port = {
        let l = TcpListener::bind((HOST, 0)).unwrap();
        l.local_addr().unwrap().port()
    };
    let r = tcp_scan(HOST, &[port], &cfg(200, 1)).await.unwrap();
    assert!(r.tcp_open.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn result_independent_of_concurrency() {
    let (_ls, ports) = tcp_listeners(3);
    let universe = low_range_plus(&ports);
    let mut seen = BTreeSet::new();
    for n in [1, 7, 128] {
        seen.insert(tcp_scan(HOST, &universe, &cfg(200, n)).await.unwrap().tcp_open);
    }
    assert_eq!(seen.len(), 1);
    assert_eq!(seen.into_iter().next().unwrap(), ports);
}

#[tokio::test(flavor = "multi_thread")]
async fn banner_is_captured() {
    let l = tokio::net::TcpListener::bind((HOST, 0)).await.unwrap();
    let port = l.local_addr().unwrap().port();
    tokio::spawn(async move {
        use tokio::io::AsyncWriteExt;
        while let Ok((mut s, _)) = l.accept().await {
            let _ = s.write_all(b"RTSP/1.0 200 OK\r\n").await;
        }
    });
    let c = ScanConfig { banner_ms: 500, ..cfg(200, 4) };
    let r = tcp_scan(HOST, &[port], &c).await.unwrap();
    assert_eq!(r.banners[&port], hex::encode(b"RTSP/1.0 200 OK\r\n"));
}

#[tokio::test(flavor = "multi_thread")]
async fn udp_states() {
    let echo = udp_echo(None).await;
    let silent_sock = StdUdp::bind((HOST, 0)).unwrap();
    let silent = silent_sock.local_addr().unwrap().port();
    let closed = free_udp_port();
    let r = udp_probe(HOST, &[echo, silent, closed], &BTreeMap::new(), &cfg(200, 4))
        .await
        .unwrap();
    assert_eq!(r.udp_state[&echo], UdpState::Responsive);
    assert_eq!(r.udp_state[&silent], UdpState::OpenOrFiltered);
    assert_eq!(r.udp_state[&closed], UdpState::Closed);
}

#[tokio::test(flavor = "multi_thread")]
async fn coap_ping_sent_verbatim() {
    let ping = vec![0x40, 0x01, 0x00, 0x01];
    let port = udp_echo(Some(ping.clone())).await;
    let payloads = BTreeMap::from([(port, ping)]);
    let r = udp_probe(HOST, &[port], &payloads, &cfg(300, 1)).await.unwrap();
    assert_eq!(r.udp_state[&port], UdpState::Responsive);
    // the same server ignores an empty datagram
    let r = udp_probe(HOST, &[port], &BTreeMap::new(), &cfg(100, 1)).await.unwrap();
    assert_eq!(r.udp_state[&port], UdpState::OpenOrFiltered);
}

fn binding(root: &str, port: u16, protocol: Protocol) -> ServiceBinding {
    ServiceBinding {
        thread_root: root.into(),
        port,
        protocol,
        bind_site: Site::Addr(0),
    }
}

#[test]
fn compare_set_algebra() {
    let b = [
        binding("policy_thread", 843, Protocol::Tcp),
        binding("main", 1300, Protocol::Tcp),
        binding("multicast_thread", 5012, Protocol::Udp),
    ];
    let live = ScanResult {
        host: HOST.into(),
        tcp_open: vec![843, 1300],
        ..Default::default()
    };
    let d = compare_with_static(&b, &live);
    assert_eq!(d.confirmed.len(), 2);
    assert_eq!(
        d.static_only,
        [ServiceEntry {
            port: 5012,
            protocol: Protocol::Udp,
            thread_root: Some("multicast_thread".into())
        }]
    );
    assert!(d.live_only.is_empty());

    let other = ScanResult {
        host: HOST.into(),
        tcp_open: vec![22],
        ..Default::default()
    };
    let d = compare_with_static(&b, &other);
    assert!(d.confirmed.is_empty());
    assert_eq!(d.live_only[0].port, 22);
    assert_eq!(d.live_only[0].thread_root, None);
}

#[tokio::test(flavor = "multi_thread")]
async fn noodles_bindings_confirmed_by_replica() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/cgx/noodles.cgx.json");
    let g = ingest_cgx(&std::fs::read_to_string(p).unwrap()).unwrap();
    let statics = map_ports(&g).unwrap().bindings;

    // replica servers on free ports stand in for the firmware's fixed ports
    let mut keep_tcp = Vec::new();
    let mut remapped = Vec::new();
    for b in &statics {
        let port = match b.protocol {
            Protocol::Tcp => {
                let l = TcpListener::bind((HOST, 0)).unwrap();
                let port = l.local_addr().unwrap().port();
                keep_tcp.push(l);
                port
            }
            Protocol::Udp => udp_echo(None).await,
        };
        remapped.push(ServiceBinding { port, ..b.clone() });
    }
    let tcp: Vec<u16> = remapped.iter().filter(|b| b.protocol == Protocol::Tcp).map(|b| b.port).collect();
    let udp: Vec<u16> = remapped.iter().filter(|b| b.protocol == Protocol::Udp).map(|b| b.port).collect();
    let t = tcp_scan(HOST, &tcp, &cfg(200, 8)).await.unwrap();
    let u = udp_probe(HOST, &udp, &BTreeMap::new(), &cfg(200, 8)).await.unwrap();
    let d = compare_with_static(&remapped, &merge_results(t, u));
    assert_eq!(d.confirmed.len(), 3);
    assert!(d.static_only.is_empty() && d.live_only.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn scan_time_is_bounded() {
    let (_ls, ports) = tcp_listeners(1);
    let start = Instant::now();
    tcp_scan(HOST, &low_range_plus(&ports), &cfg(200, 128)).await.unwrap();
    // ceil(1025 / 128) rounds of at most 200 ms each, plus slack
    assert!(start.elapsed() < Duration::from_millis(9 * 200 + 2000));
}
