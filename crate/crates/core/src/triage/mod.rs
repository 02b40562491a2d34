//! Extracted-filesystem triage: inventory, credential and endpoint scan,
//! and init/update script audit.

mod inventory;
mod scripts;
mod sensitive;

pub use inventory::{walk_tree, FileClass, FileInventory, InventoryEntry, TriageError, SCAN_CAP};
pub use scripts::audit_scripts;
pub use sensitive::find_sensitive;

use crate::finding::{sort_findings, Finding};
use crate::rules::Rules;

/// Runs both passes over an inventory and returns findings in (path, line)
/// order.
pub fn triage_inventory(inventory: &FileInventory, rules: &Rules) -> Vec<Finding> {
    let mut findings = find_sensitive(inventory, rules);
    findings.extend(audit_scripts(inventory, rules));
    sort_findings(&mut findings);
    findings
}
