use super::candidates::CandidatePoint;
use super::graph::CallGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Node expansions spent counting discarded paths once the chain cap is hit.
const DISCARD_COUNT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLimits {
    /// Maximum chain length in call edges.
    pub max_depth: usize,
    pub max_chains: usize,
}

impl Default for ChainLimits {
    fn default() -> Self {
        Self {
            max_depth: 64,
            max_chains: 10_000,
        }
    }
}

/// A simple call path from a root to the function containing a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InvocationChain {
    pub root: String,
    pub path: Vec<String>,
    pub candidate: CandidatePoint,
    /// The enumeration this chain came from hit a limit, so the chain set for
    /// this candidate is incomplete. The chain itself is always valid.
    pub truncated: bool,
}

impl InvocationChain {
    /// Length in call edges.
    pub fn depth(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEnumeration {
    pub candidate: CandidatePoint,
    pub chains: Vec<InvocationChain>,
    pub truncated: bool,
    /// Paths dropped by the limits. When `discarded_exact` is false this is a
    /// lower bound.
    pub discarded: u64,
    pub discarded_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("unknown candidate: no call from '{function}' to '{sink}' at {site}")]
    UnknownCandidate {
        function: String,
        sink: String,
        site: String,
    },
}

struct Search<'g> {
    graph: &'g CallGraph,
    target: usize,
    reaches: Vec<bool>,
    on_path: Vec<bool>,
    path: Vec<usize>,
    limits: ChainLimits,
    found: Vec<Vec<usize>>,
    truncated: bool,
    discarded: u64,
    budget: u64,
    exact: bool,
}

impl Search<'_> {
    fn dfs(&mut self, v: usize) {
        if self.truncated && self.found.len() >= self.limits.max_chains {
            if self.budget == 0 {
                self.exact = false;
                return;
            }
            self.budget -= 1;
        }
        self.path.push(v);
        self.on_path[v] = true;
        if v == self.target {
            if self.found.len() < self.limits.max_chains {
                self.found.push(self.path.clone());
            } else {
                self.truncated = true;
                self.discarded += 1;
            }
        } else {
            let graph = self.graph;
            let next = graph
                .out_idx(v)
                .iter()
                .copied()
                .filter(|&c| self.reaches[c] && !self.on_path[c]);
            if self.path.len() > self.limits.max_depth {
                // every viable continuation is cut by the depth limit
                if next.count() > 0 {
                    self.truncated = true;
                    self.discarded += 1;
                    self.exact = false;
                }
            } else {
                for c in next.collect::<Vec<_>>() {
                    self.dfs(c);
                }
            }
        }
        self.on_path[v] = false;
        self.path.pop();
    }
}

fn known(graph: &CallGraph, c: &CandidatePoint) -> bool {
    graph.calls().iter().any(|e| {
        e.caller == c.containing_function
            && e.site == c.site
            && graph.function(&e.callee).is_some_and(|f| f.name == c.sink)
    })
}

/// All simple paths from every root (entry, then spawn entries) to the
/// candidate's containing function, in depth-first order with children
/// visited by ascending function id.
pub fn enumerate_chains(
    graph: &CallGraph,
    candidate: &CandidatePoint,
    limits: ChainLimits,
) -> Result<ChainEnumeration, ChainError> {
    let target = graph
        .idx(&candidate.containing_function)
        .filter(|_| known(graph, candidate))
        .ok_or_else(|| ChainError::UnknownCandidate {
            function: candidate.containing_function.clone(),
            sink: candidate.sink.clone(),
            site: candidate.site.to_string(),
        })?;

    let n = graph.len();
    let mut reaches = vec![false; n];
    let mut stack = vec![target];
    reaches[target] = true;
    while let Some(v) = stack.pop() {
        for &p in graph.in_idx(v) {
            if !reaches[p] {
                reaches[p] = true;
                stack.push(p);
            }
        }
    }

    let mut s = Search {
        graph,
        target,
        reaches,
        on_path: vec![false; n],
        path: Vec::new(),
        limits,
        found: Vec::new(),
        truncated: false,
        discarded: 0,
        budget: DISCARD_COUNT_BUDGET,
        exact: true,
    };
    for &r in graph.root_idx() {
        if s.reaches[r] {
            s.dfs(r);
        }
    }

    let truncated = s.truncated;
    let chains = s
        .found
        .into_iter()
        .map(|p| InvocationChain {
            root: graph.id_of(p[0]).to_string(),
            path: p.iter().map(|&i| graph.id_of(i).to_string()).collect(),
            candidate: candidate.clone(),
            truncated,
        })
        .collect();
    Ok(ChainEnumeration {
        candidate: candidate.clone(),
        chains,
        truncated,
        discarded: s.discarded,
        discarded_exact: s.exact,
    })
}

/// Runs [`enumerate_chains`] for each candidate in parallel; output order
/// follows `candidates`.
pub fn enumerate_all(
    graph: &CallGraph,
    candidates: &[CandidatePoint],
    limits: ChainLimits,
) -> Result<Vec<ChainEnumeration>, ChainError> {
    candidates
        .par_iter()
        .map(|c| enumerate_chains(graph, c, limits))
        .collect()
}
