use super::chains::InvocationChain;
use super::graph::CallGraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Label of the group rooted at the program entry.
pub const MAIN_LABEL: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadGroup {
    pub root: String,
    /// `main` for the entry, the function name for spawn entries.
    pub label: String,
    pub chains: Vec<InvocationChain>,
}

fn label(graph: &CallGraph, root: &str) -> String {
    if root == graph.entry() {
        MAIN_LABEL.to_string()
    } else {
        graph
            .function(root)
            .map(|f| f.name.clone())
            .unwrap_or_else(|| root.to_string())
    }
}

/// Partitions chains by their root. The entry group comes first, the rest
/// follow in root id order; chain order inside a group is preserved.
pub fn attribute_threads(graph: &CallGraph, chains: &[InvocationChain]) -> Vec<ThreadGroup> {
    let mut groups: BTreeMap<(bool, &str), Vec<InvocationChain>> = BTreeMap::new();
    for c in chains {
        let is_entry = c.root == graph.entry();
        groups.entry((!is_entry, &c.root)).or_default().push(c.clone());
    }
    groups
        .into_iter()
        .map(|((_, root), chains)| ThreadGroup {
            root: root.to_string(),
            label: label(graph, root),
            chains,
        })
        .collect()
}

/// Local functions that nothing calls or spawns and that are not the entry.
pub fn orphans(graph: &CallGraph) -> Vec<String> {
    let mut out: Vec<String> = graph
        .functions()
        .iter()
        .filter(|f| {
            !f.is_import
                && f.id != graph.entry()
                && !graph.is_spawn_entry(&f.id)
                && graph.callers(&f.id).is_empty()
        })
        .map(|f| f.id.clone())
        .collect();
    out.sort();
    out
}
