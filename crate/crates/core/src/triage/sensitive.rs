use super::inventory::{FileClass, FileInventory, InventoryEntry};
use crate::creds::{classify_hash, parse_shadow, HashScheme};
use crate::finding::{sort_findings, Category, Evidence, Finding};
use crate::rules::Rules;
use rayon::prelude::*;
use regex::Regex;
use std::sync::LazyLock;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\b[a-zA-Z][a-zA-Z0-9+.-]*://[^\s"'<>]+"#).unwrap());
static DOTTED_QUAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^0-9.])((?:25[0-5]|2[0-4][0-9]|1[0-9]{2}|[1-9]?[0-9])(?:\.(?:25[0-5]|2[0-4][0-9]|1[0-9]{2}|[1-9]?[0-9])){3})(?:$|[^0-9.])").unwrap()
});

fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

fn in_etc(path: &str) -> bool {
    path.split('/').rev().nth(1) == Some("etc")
}

/// Netmasks and the unspecified address are not endpoints.
fn is_endpoint_ip(ip: &str) -> bool {
    let first = ip.split('.').next().unwrap_or("");
    first != "0" && first != "255"
}

fn decode_text(bytes: &[u8]) -> Option<String> {
    if bytes.contains(&0) {
        return None;
    }
    Some(String::from_utf8_lossy(bytes).into_owned())
}

fn evidence(entry: &InventoryEntry, line: u32, excerpt: &str) -> Evidence {
    Evidence {
        path: entry.path.clone(),
        line: Some(line),
        excerpt: Some(excerpt.to_string()),
    }
}

fn scan_config(entry: &InventoryEntry, text: &str, rules: &Rules) -> Vec<Finding> {
    let mut out = Vec::new();
    let is_shadow = basename(&entry.path) == "shadow";
    for (i, line) in text.lines().enumerate() {
        let n = i as u32 + 1;
        if let Some(hit) = rules.credential_on_line(line, n) {
            out.push(Finding::new(
                Category::PlaintextCredential,
                evidence(entry, n, line.trim()),
                0,
                format!("credential key '{}' stored with a plaintext value", hit.key),
            ));
        }
        let mut ordinal = 0;
        for m in URL.find_iter(line) {
            out.push(Finding::new(
                Category::HardcodedEndpoint,
                evidence(entry, n, m.as_str()),
                ordinal,
                "hard-coded URL",
            ));
            ordinal += 1;
        }
        if is_shadow {
            continue;
        }
        for c in DOTTED_QUAD.captures_iter(line) {
            let ip = c.get(1).unwrap().as_str();
            if URL.find_iter(line).any(|u| u.as_str().contains(ip)) || !is_endpoint_ip(ip) {
                continue;
            }
            out.push(Finding::new(
                Category::HardcodedEndpoint,
                evidence(entry, n, ip),
                ordinal,
                "hard-coded IPv4 address",
            ));
            ordinal += 1;
        }
    }
    if is_shadow {
        let parsed = parse_shadow(text);
        let lines: Vec<&str> = text.lines().collect();
        for e in parsed.entries {
            let class = classify_hash(&e.hash_field);
            if !class.weak {
                continue;
            }
            // parse_shadow keeps line order; locate by exact reconstruction.
            let line = e.to_line();
            let Some(idx) = lines.iter().position(|l| *l == line) else {
                continue;
            };
            let scheme = match class.scheme {
                HashScheme::Descrypt => "descrypt (13 characters, 8-character password limit)",
                _ => "a weak scheme",
            };
            out.push(Finding::new(
                Category::WeakHash,
                evidence(entry, idx as u32 + 1, &e.hash_field),
                0,
                format!("password hash for '{}' uses {scheme}", e.user),
            ));
        }
    }
    out
}

fn scan_entry(inventory: &FileInventory, entry: &InventoryEntry, rules: &Rules) -> Vec<Finding> {
    let mut out = Vec::new();
    let name = basename(&entry.path);
    if matches!(name, "shadow" | "passwd") && !in_etc(&entry.path) {
        out.push(Finding::new(
            Category::SensitiveFile,
            Evidence {
                path: entry.path.clone(),
                line: None,
                excerpt: None,
            },
            0,
            format!("{name} file outside /etc"),
        ));
    }
    let Ok(bytes) = inventory.read_capped(entry) else {
        return out;
    };
    let Some(text) = decode_text(&bytes) else {
        return out;
    };
    match entry.class {
        FileClass::Config => out.extend(scan_config(entry, &text, rules)),
        FileClass::KeyMaterial => {
            if let Some((i, line)) = text
                .lines()
                .enumerate()
                .find(|(_, l)| l.starts_with("-----BEGIN ") && l.contains("PRIVATE KEY"))
            {
                out.push(Finding::new(
                    Category::SensitiveFile,
                    evidence(entry, i as u32 + 1, line),
                    0,
                    "private key material",
                ));
            }
        }
        _ => {}
    }
    out
}

/// Scans configuration and key files for plaintext credentials, weak
/// password hashes, hard-coded endpoints and misplaced credential stores.
/// ELF executables and binary files are never reported.
pub fn find_sensitive(inventory: &FileInventory, rules: &Rules) -> Vec<Finding> {
    let mut findings: Vec<Finding> = inventory
        .entries
        .par_iter()
        .filter(|e| {
            e.link_target.is_none() && matches!(e.class, FileClass::Config | FileClass::KeyMaterial)
        })
        .flat_map_iter(|e| scan_entry(inventory, e, rules))
        .collect();
    sort_findings(&mut findings);
    findings
}
