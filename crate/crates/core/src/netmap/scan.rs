use super::scope::check_scope;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::ErrorKind;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr};
use std::time::Duration;
use tokio::io::AsyncReadExt;
use tokio::net::{TcpStream, UdpSocket};
use tokio::time::timeout;

/// An open TCP port and its hex-encoded banner, if one arrived.
type OpenPort = (u16, Option<String>);

/// UDP ports probed when none are given.
pub const DEFAULT_UDP_PORTS: [u16; 4] = [3702, 5012, 5683, 19966];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UdpState {
    Responsive,
    OpenOrFiltered,
    Closed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanResult {
    pub host: String,
    pub tcp_open: Vec<u16>,
    pub udp_state: BTreeMap<u16, UdpState>,
    /// First bytes sent by open TCP services, hex-encoded.
    pub banners: BTreeMap<u16, String>,
}

impl ScanResult {
    pub fn udp_responsive(&self) -> Vec<u16> {
        self.udp_state
            .iter()
            .filter(|(_, s)| **s == UdpState::Responsive)
            .map(|(p, _)| *p)
            .collect()
    }
}

/// Combines a TCP and a UDP partial result for the same host.
pub fn merge_results(tcp: ScanResult, udp: ScanResult) -> ScanResult {
    let mut out = tcp;
    out.udp_state.extend(udp.udp_state);
    out.banners.extend(udp.banners);
    if out.host.is_empty() {
        out.host = udp.host;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    /// Wait this long for a banner on open TCP ports; 0 disables.
    pub banner_ms: u64,
    /// Scan targets outside private and loopback ranges.
    pub owns_host: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            timeout_ms: 500,
            max_in_flight: 128,
            banner_ms: 0,
            owns_host: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("no ports to scan")]
    NoPorts,
    #[error("port 0 is not scannable")]
    PortZero,
    #[error("timeout must be at least 1 ms")]
    Timeout,
    #[error("max_in_flight must be at least 1")]
    Concurrency,
    #[error("cannot resolve host '{0}'")]
    Resolve(String),
    #[error("{0}")]
    OutOfScope(String),
    /// Local resources ran out; the probe outcome is unknown and the scan
    /// can be retried with lower concurrency.
    #[error("local socket resources exhausted while probing port {port}: {source}")]
    Exhausted {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid port specification '{0}'")]
    PortSpec(String),
}

impl ScanError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ScanError::Exhausted { .. })
    }
}

/// Parses `a-b,c,d-e` into a sorted, duplicate-free port list.
pub fn parse_port_spec(spec: &str) -> Result<Vec<u16>, ScanError> {
    let bad = || ScanError::PortSpec(spec.to_string());
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u16>(), b.trim().parse::<u16>()),
            None => (part.parse::<u16>(), part.parse::<u16>()),
        };
        let (lo, hi) = (lo.map_err(|_| bad())?, hi.map_err(|_| bad())?);
        if lo == 0 || lo > hi {
            return Err(bad());
        }
        out.extend(lo..=hi);
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out.into_iter().collect())
}

/// Resolves `host` to one address and applies the scope guard.
pub async fn resolve_host(host: &str, owns_host: bool) -> Result<IpAddr, ScanError> {
    let ip = match host.parse::<IpAddr>() {
        Ok(ip) => ip,
        Err(_) => tokio::net::lookup_host((host, 0))
            .await
            .map_err(|_| ScanError::Resolve(host.to_string()))?
            .map(|a| a.ip())
            .min_by_key(|ip| ip.is_ipv6())
            .ok_or_else(|| ScanError::Resolve(host.to_string()))?,
    };
    check_scope(ip, owns_host).map_err(ScanError::OutOfScope)?;
    Ok(ip)
}

fn validate(ports: &[u16], cfg: &ScanConfig) -> Result<(), ScanError> {
    if ports.is_empty() {
        return Err(ScanError::NoPorts);
    }
    if ports.contains(&0) {
        return Err(ScanError::PortZero);
    }
    if cfg.timeout_ms == 0 {
        return Err(ScanError::Timeout);
    }
    if cfg.max_in_flight == 0 {
        return Err(ScanError::Concurrency);
    }
    Ok(())
}

fn exhausted(e: &std::io::Error) -> bool {
    // EMFILE, ENFILE, ENOBUFS, EADDRNOTAVAIL on Linux
    matches!(e.raw_os_error(), Some(24 | 23 | 105 | 99)) || e.kind() == ErrorKind::AddrNotAvailable
}

fn dedup(ports: &[u16]) -> Vec<u16> {
    let set: BTreeSet<u16> = ports.iter().copied().collect();
    set.into_iter().collect()
}

/// Full-connect TCP scan. A port is open iff the handshake completes within
/// the timeout.
pub async fn tcp_scan(host: &str, ports: &[u16], cfg: &ScanConfig) -> Result<ScanResult, ScanError> {
    validate(ports, cfg)?;
    let ip = resolve_host(host, cfg.owns_host).await?;
    let limit = Duration::from_millis(cfg.timeout_ms);
    let banner_wait = Duration::from_millis(cfg.banner_ms);

    let probes = stream::iter(dedup(ports)).map(|port| async move {
        match timeout(limit, TcpStream::connect(SocketAddr::new(ip, port))).await {
            Ok(Ok(mut stream)) => {
                let mut banner = None;
                if !banner_wait.is_zero() {
                    let mut buf = [0u8; 256];
                    if let Ok(Ok(n)) = timeout(banner_wait, stream.read(&mut buf)).await {
                        if n > 0 {
                            banner = Some(hex::encode(&buf[..n]));
                        }
                    }
                }
                drop(stream);
                Ok(Some((port, banner)))
            }
            Ok(Err(e)) if exhausted(&e) => Err(ScanError::Exhausted { port, source: e }),
            _ => Ok(None),
        }
    });
    let verdicts: Vec<Result<Option<OpenPort>, ScanError>> =
        probes.buffer_unordered(cfg.max_in_flight).collect().await;

    let mut result = ScanResult {
        host: host.to_string(),
        ..Default::default()
    };
    for v in verdicts {
        if let Some((port, banner)) = v? {
            result.tcp_open.push(port);
            if let Some(b) = banner {
                result.banners.insert(port, b);
            }
        }
    }
    result.tcp_open.sort_unstable();
    Ok(result)
}

async fn probe_once(ip: IpAddr, port: u16, payload: &[u8], limit: Duration) -> std::io::Result<Option<UdpState>> {
    let local: SocketAddr = match ip {
        IpAddr::V4(_) => (Ipv4Addr::UNSPECIFIED, 0).into(),
        IpAddr::V6(_) => (Ipv6Addr::UNSPECIFIED, 0).into(),
    };
    let sock = UdpSocket::bind(local).await?;
    // connecting lets ICMP port-unreachable surface as ConnectionRefused
    sock.connect(SocketAddr::new(ip, port)).await?;
    match sock.send(payload).await {
        Err(e) if e.kind() == ErrorKind::ConnectionRefused => return Ok(Some(UdpState::Closed)),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let mut buf = [0u8; 512];
    match timeout(limit, sock.recv(&mut buf)).await {
        Ok(Ok(_)) => Ok(Some(UdpState::Responsive)),
        Ok(Err(e)) if e.kind() == ErrorKind::ConnectionRefused => Ok(Some(UdpState::Closed)),
        Ok(Err(e)) => Err(e),
        Err(_) => Ok(None),
    }
}

/// Sends one datagram per port (the payload from `payloads`, else empty) and
/// classifies the port by the reply. A silent port with a payload is probed
/// once more before it is reported open-or-filtered.
pub async fn udp_probe(
    host: &str,
    ports: &[u16],
    payloads: &BTreeMap<u16, Vec<u8>>,
    cfg: &ScanConfig,
) -> Result<ScanResult, ScanError> {
    validate(ports, cfg)?;
    let ip = resolve_host(host, cfg.owns_host).await?;
    let limit = Duration::from_millis(cfg.timeout_ms);

    let probes = stream::iter(dedup(ports)).map(|port| async move {
        let payload = payloads.get(&port).map(Vec::as_slice).unwrap_or(&[]);
        let attempts = if payload.is_empty() { 1 } else { 2 };
        for _ in 0..attempts {
            match probe_once(ip, port, payload, limit).await {
                Ok(Some(state)) => return Ok((port, state)),
                Ok(None) => {}
                Err(e) if exhausted(&e) => return Err(ScanError::Exhausted { port, source: e }),
                Err(_) => return Ok((port, UdpState::OpenOrFiltered)),
            }
        }
        Ok((port, UdpState::OpenOrFiltered))
    });
    let verdicts: Vec<Result<(u16, UdpState), ScanError>> =
        probes.buffer_unordered(cfg.max_in_flight).collect().await;
    let mut result = ScanResult {
        host: host.to_string(),
        ..Default::default()
    };
    for v in verdicts {
        let (port, state) = v?;
        result.udp_state.insert(port, state);
    }
    Ok(result)
}
