use super::catalog::SinkCatalog;
use super::cgx::Site;
use super::graph::CallGraph;
use serde::{Deserialize, Serialize};

/// A call from a local function to a catalogued sink import.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub containing_function: String,
    pub sink: String,
    pub site: Site,
    pub tier: String,
}

/// One candidate per call edge whose callee is a catalogued import, sorted
/// by (containing function, sink, site).
pub fn find_candidates(graph: &CallGraph, catalog: &SinkCatalog) -> Vec<CandidatePoint> {
    let mut out: Vec<CandidatePoint> = graph
        .calls()
        .iter()
        .filter_map(|c| {
            let callee = graph.function(&c.callee)?;
            if !callee.is_import {
                return None;
            }
            let tier = catalog.tier_of(&callee.name)?;
            Some(CandidatePoint {
                containing_function: c.caller.clone(),
                sink: callee.name.clone(),
                site: c.site.clone(),
                tier: tier.to_string(),
            })
        })
        .collect();
    out.sort();
    out
}

/// Per-function view: one candidate per (containing function, sink), keeping
/// the lowest site. Idempotent.
pub fn dedup_candidates(candidates: &[CandidatePoint]) -> Vec<CandidatePoint> {
    let mut out = candidates.to_vec();
    out.sort();
    out.dedup_by(|b, a| a.containing_function == b.containing_function && a.sink == b.sink);
    out
}
