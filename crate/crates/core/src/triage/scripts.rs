use super::inventory::{FileClass, FileInventory, InventoryEntry};
use crate::finding::{sort_findings, Category, Evidence, Finding};
use crate::rules::Rules;
use rayon::prelude::*;
use regex::Regex;
use std::sync::LazyLock;

static RC_DISPATCH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^S[0-9][0-9]").unwrap());

fn is_init_script(path: &str) -> bool {
    let mut parts = path.rsplit('/');
    let base = parts.next().unwrap_or("");
    parts.next() == Some("init.d") && RC_DISPATCH.is_match(base)
}

fn audit_one(inventory: &FileInventory, entry: &InventoryEntry, rules: &Rules) -> Vec<Finding> {
    let mut out = Vec::new();
    if is_init_script(&entry.path) {
        out.push(Finding::new(
            Category::InitScript,
            Evidence {
                path: entry.path.clone(),
                line: None,
                excerpt: None,
            },
            0,
            "started at boot by the rcS S[0-9][0-9] dispatch loop",
        ));
    }
    let Ok(bytes) = inventory.read_capped(entry) else {
        return out;
    };
    let text = String::from_utf8_lossy(&bytes);
    let code = || {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'))
    };
    let reads_media = code().any(|(_, l)| rules.is_removable_media(l));
    let verified = code().any(|(_, l)| rules.is_integrity_check(l));
    let write = code().find(|(_, l)| rules.is_flash_write(l));
    if let (true, false, Some((i, line))) = (reads_media, verified, write) {
        out.push(Finding::new(
            Category::UnsignedUpdatePath,
            Evidence {
                path: entry.path.clone(),
                line: Some(i as u32 + 1),
                excerpt: Some(line.trim().to_string()),
            },
            0,
            "writes flash from removable media without an integrity check",
        ));
    }
    out
}

/// Flags rc-dispatched init scripts and unverified flash updates from
/// removable media.
pub fn audit_scripts(inventory: &FileInventory, rules: &Rules) -> Vec<Finding> {
    let mut findings: Vec<Finding> = inventory
        .entries
        .par_iter()
        .filter(|e| e.class == FileClass::ShellScript && e.link_target.is_none())
        .flat_map_iter(|e| audit_one(inventory, e, rules))
        .collect();
    sort_findings(&mut findings);
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_script_names() {
        assert!(is_init_script("etc/init.d/S04app"));
        assert!(is_init_script("etc/init.d/S99"));
        assert!(!is_init_script("etc/init.d/rcS"));
        assert!(!is_init_script("etc/init.d/K10x"));
        assert!(!is_init_script("etc/S04app"));
        assert!(!is_init_script("etc/init.d/s04app"));
    }
}
