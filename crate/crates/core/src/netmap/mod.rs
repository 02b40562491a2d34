//! Live service mapping: full-connect TCP scan, UDP probes, and comparison
//! against statically recovered bindings.

mod compare;
mod scan;
mod scope;

pub use compare::{compare_with_static, Discrepancies, ServiceEntry};
pub use scan::{
    merge_results, parse_port_spec, resolve_host, tcp_scan, udp_probe, ScanConfig, ScanError,
    ScanResult, UdpState, DEFAULT_UDP_PORTS,
};
pub use scope::{check_scope, is_private_or_loopback};
