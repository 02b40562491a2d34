use super::scan::ScanResult;
use crate::callgraph::{Protocol, ServiceBinding};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServiceEntry {
    pub port: u16,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_root: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancies {
    pub confirmed: Vec<ServiceEntry>,
    pub static_only: Vec<ServiceEntry>,
    pub live_only: Vec<ServiceEntry>,
}

/// Splits static bindings and live services into confirmed, static-only
/// and live-only sets. Live services are open TCP ports and responsive UDP
/// ports; an open-or-filtered UDP port does not count as live.
pub fn compare_with_static(bindings: &[ServiceBinding], scan: &ScanResult) -> Discrepancies {
    let live: BTreeSet<(u16, Protocol)> = scan
        .tcp_open
        .iter()
        .map(|&p| (p, Protocol::Tcp))
        .chain(scan.udp_responsive().into_iter().map(|p| (p, Protocol::Udp)))
        .collect();
    let mut roots: BTreeMap<(u16, Protocol), BTreeSet<&str>> = BTreeMap::new();
    for b in bindings {
        roots.entry((b.port, b.protocol)).or_default().insert(&b.thread_root);
    }

    let mut out = Discrepancies::default();
    for (&(port, protocol), threads) in &roots {
        let target = if live.contains(&(port, protocol)) {
            &mut out.confirmed
        } else {
            &mut out.static_only
        };
        for t in threads {
            target.push(ServiceEntry {
                port,
                protocol,
                thread_root: Some(t.to_string()),
            });
        }
    }
    for &(port, protocol) in &live {
        if !roots.contains_key(&(port, protocol)) {
            out.live_only.push(ServiceEntry {
                port,
                protocol,
                thread_root: None,
            });
        }
    }
    out
}
