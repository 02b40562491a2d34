use std::net::IpAddr;

/// Loopback, RFC 1918, link-local, and IPv6 unique-local addresses.
pub fn is_private_or_loopback(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_loopback() || v4.is_private() || v4.is_link_local(),
        IpAddr::V6(v6) => {
            if let Some(v4) = v6.to_ipv4_mapped() {
                return is_private_or_loopback(IpAddr::V4(v4));
            }
            let first = v6.segments()[0];
            v6.is_loopback() || first & 0xfe00 == 0xfc00 || first & 0xffc0 == 0xfe80
        }
    }
}

/// Refuses public targets unless the caller asserted ownership.
pub fn check_scope(ip: IpAddr, owns_host: bool) -> Result<(), String> {
    if owns_host || is_private_or_loopback(ip) {
        Ok(())
    } else {
        Err(format!(
            "{ip} is not a private or loopback address; pass --i-own-this-host to scan it"
        ))
    }
}
