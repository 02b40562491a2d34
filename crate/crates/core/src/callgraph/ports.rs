use super::cgx::{ConstKind, Site};
use super::graph::CallGraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Tcp,
    Udp,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tcp" => Some(Protocol::Tcp),
            "udp" => Some(Protocol::Udp),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServiceBinding {
    pub thread_root: String,
    pub port: u16,
    pub protocol: Protocol,
    pub bind_site: Site,
}

/// A bind with a known port whose protocol could not be determined.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnknownProtocolBind {
    pub thread_root: String,
    pub port: u16,
    pub bind_site: Site,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortMap {
    pub bindings: Vec<ServiceBinding>,
    pub unknown_protocol: Vec<UnknownProtocolBind>,
}

impl PortMap {
    /// Distinct (port, protocol) pairs.
    pub fn services(&self) -> BTreeSet<(u16, Protocol)> {
        self.bindings.iter().map(|b| (b.port, b.protocol)).collect()
    }

    pub fn bound_roots(&self) -> BTreeSet<&str> {
        self.bindings
            .iter()
            .map(|b| b.thread_root.as_str())
            .chain(self.unknown_protocol.iter().map(|b| b.thread_root.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PortError {
    #[error("port constant {value} at {site} is outside 1..65535")]
    OutOfRange { site: String, value: i64 },
}

fn protocol_at(graph: &CallGraph, site: &Site) -> BTreeSet<Protocol> {
    graph
        .consts_at(site)
        .filter(|c| c.kind == ConstKind::Protocol)
        .filter_map(|c| c.value.as_text().and_then(Protocol::parse))
        .collect()
}

/// Binds reachable from each root through call edges. Protocol comes from a
/// constant at the bind site, else from the `socket` calls in the same
/// function when they agree on one protocol.
pub fn map_ports(graph: &CallGraph) -> Result<PortMap, PortError> {
    let mut map = PortMap::default();
    for &root in graph.root_idx() {
        let mut seen = vec![false; graph.len()];
        let mut stack = vec![root];
        seen[root] = true;
        let mut closure = Vec::new();
        while let Some(v) = stack.pop() {
            closure.push(v);
            for &c in graph.out_idx(v) {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        let root_id = graph.id_of(root);
        for v in closure {
            let func = graph.id_of(v);
            let calls_to = |name: &'static str| {
                graph.calls().iter().filter(move |e| {
                    e.caller == func
                        && graph
                            .function(&e.callee)
                            .is_some_and(|f| f.is_import && f.name == name)
                })
            };
            for bind in calls_to("bind") {
                for c in graph.consts_at(&bind.site).filter(|c| c.kind == ConstKind::Port) {
                    let value = c.value.as_int().unwrap_or(-1);
                    let port = u16::try_from(value)
                        .ok()
                        .filter(|&p| p != 0)
                        .ok_or_else(|| PortError::OutOfRange {
                            site: bind.site.to_string(),
                            value,
                        })?;
                    let mut protos = protocol_at(graph, &bind.site);
                    if protos.is_empty() {
                        for s in calls_to("socket") {
                            protos.extend(protocol_at(graph, &s.site));
                        }
                    }
                    if protos.len() == 1 {
                        map.bindings.push(ServiceBinding {
                            thread_root: root_id.to_string(),
                            port,
                            protocol: *protos.first().unwrap(),
                            bind_site: bind.site.clone(),
                        });
                    } else {
                        map.unknown_protocol.push(UnknownProtocolBind {
                            thread_root: root_id.to_string(),
                            port,
                            bind_site: bind.site.clone(),
                        });
                    }
                }
            }
        }
    }
    map.bindings.sort();
    map.bindings.dedup();
    map.unknown_protocol.sort();
    map.unknown_protocol.dedup();
    Ok(map)
}
