use super::candidates::{dedup_candidates, find_candidates, CandidatePoint};
use super::catalog::SinkCatalog;
use super::chains::{enumerate_all, ChainEnumeration, ChainError, ChainLimits};
use super::graph::CallGraph;
use super::ports::{map_ports, PortError, PortMap};
use super::threads::{attribute_threads, orphans, ThreadGroup};

/// Everything the analyzer derives from one call graph.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub raw_candidates: Vec<CandidatePoint>,
    pub candidates: Vec<CandidatePoint>,
    pub enumerations: Vec<ChainEnumeration>,
    pub threads: Vec<ThreadGroup>,
    pub ports: PortMap,
    pub orphans: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Port(#[from] PortError),
}

/// Candidates, per-function chains, thread groups and port bindings.
pub fn analyze(
    graph: &CallGraph,
    catalog: &SinkCatalog,
    limits: ChainLimits,
) -> Result<Analysis, AnalysisError> {
    let raw_candidates = find_candidates(graph, catalog);
    let candidates = dedup_candidates(&raw_candidates);
    let enumerations = enumerate_all(graph, &candidates, limits)?;
    let chains: Vec<_> = enumerations.iter().flat_map(|e| e.chains.iter().cloned()).collect();
    Ok(Analysis {
        threads: attribute_threads(graph, &chains),
        ports: map_ports(graph)?,
        orphans: orphans(graph),
        raw_candidates,
        candidates,
        enumerations,
    })
}
