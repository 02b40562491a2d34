//! Call-graph analysis: candidate points, invocation chains, thread
//! attribution and port mapping over the CGX model.

mod analysis;
mod candidates;
mod catalog;
mod cgx;
mod chains;
mod graph;
mod ports;
mod threads;

pub use analysis::{analyze, Analysis, AnalysisError};
pub use candidates::{dedup_candidates, find_candidates, CandidatePoint};
pub use catalog::{CatalogError, SinkCatalog, DEFAULT_CATALOG_JSON};
pub use cgx::{
    ingest_cgx, merge_consts, CallEdge, CgxDocument, CgxError, ConstArg, ConstConfidence,
    ConstKind, ConstValue, FunctionNode, Site, SpawnEdge, CGX_VERSION,
};
pub use chains::{
    enumerate_all, enumerate_chains, ChainEnumeration, ChainError, ChainLimits, InvocationChain,
};
pub use graph::CallGraph;
pub use ports::{map_ports, PortError, PortMap, Protocol, ServiceBinding, UnknownProtocolBind};
pub use threads::{attribute_threads, orphans, ThreadGroup, MAIN_LABEL};
