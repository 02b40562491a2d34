use super::graph::CallGraph;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;

pub const CGX_VERSION: u32 = 1;

/// A call or spawn site: an instruction address, or a producer-chosen
/// synthetic id when no address exists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Addr(u64),
    Synthetic(String),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Addr(a) => write!(f, "0x{a:08x}"),
            Site::Synthetic(s) => f.write_str(s),
        }
    }
}

pub(crate) fn parse_hex(s: &str) -> Option<u64> {
    let h = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    if h.is_empty() {
        return None;
    }
    u64::from_str_radix(h, 16).ok()
}

impl Site {
    pub fn parse(s: &str) -> Self {
        parse_hex(s).map(Site::Addr).unwrap_or_else(|| Site::Synthetic(s.to_string()))
    }
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Num(n) => Site::Addr(n),
            Raw::Text(t) if t.is_empty() => return Err(de::Error::custom("empty site id")),
            Raw::Text(t) => Site::parse(&t),
        })
    }
}

mod hex_addr {
    use super::parse_hex;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(a) => s.serialize_str(&format!("0x{a:08x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(t) => parse_hex(&t)
                .map(Some)
                .ok_or_else(|| de::Error::custom(format!("address '{t}' is not a 0x-hex string"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionNode {
    pub id: String,
    pub name: String,
    #[serde(default, with = "hex_addr", skip_serializing_if = "Option::is_none")]
    pub addr: Option<u64>,
    #[serde(default)]
    pub is_import: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub site: Site,
    /// Set by producers for indirect calls they resolved themselves.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub resolved_indirect: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnEdge {
    pub spawner: String,
    pub entry: String,
    pub site: Site,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstKind {
    Port,
    Protocol,
    String,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstValue {
    Int(i64),
    Text(String),
}

impl ConstValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ConstValue::Int(v) => Some(*v),
            ConstValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ConstValue::Text(t) => Some(t),
            ConstValue::Int(_) => None,
        }
    }
}

impl fmt::Display for ConstValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstValue::Int(v) => write!(f, "{v}"),
            ConstValue::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstConfidence {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstArg {
    pub site: Site,
    pub arg_index: u32,
    pub value: ConstValue,
    pub kind: ConstKind,
    /// Absent means exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConstConfidence>,
}

impl ConstArg {
    pub fn is_heuristic(&self) -> bool {
        self.confidence == Some(ConstConfidence::Heuristic)
    }
}

/// The CGX exchange document, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgxDocument {
    pub cgx_version: u32,
    pub entry: String,
    pub functions: Vec<FunctionNode>,
    #[serde(default)]
    pub calls: Vec<CallEdge>,
    #[serde(default)]
    pub spawns: Vec<SpawnEdge>,
    #[serde(default)]
    pub consts: Vec<ConstArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CgxError {
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unsupported cgx_version {0} (expected {CGX_VERSION})")]
    Version(u32),
    #[error("duplicate function id '{id}' at {pointer}")]
    DuplicateId { id: String, pointer: String },
    #[error("undeclared function id '{id}' referenced at {pointer}")]
    Dangling { id: String, pointer: String },
    #[error("entry function '{0}' is not declared")]
    MissingEntry(String),
    #[error("duplicate call edge at {pointer}")]
    DuplicateEdge { pointer: String },
    #[error("import '{id}' has an outgoing call edge at {pointer}")]
    ImportCalls { id: String, pointer: String },
    #[error("invalid constant at {pointer}: {message}")]
    Const { pointer: String, message: String },
}

fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses CGX JSON text. Schema errors carry a JSON-pointer locator.
pub fn parse_cgx(text: &str) -> Result<CgxDocument, CgxError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CgxError::Schema {
        pointer: to_pointer(e.path()),
        message: e.inner().to_string(),
    })
}

/// Checks referential integrity and builds the immutable graph.
pub fn validate(doc: CgxDocument) -> Result<CallGraph, CgxError> {
    if doc.cgx_version != CGX_VERSION {
        return Err(CgxError::Version(doc.cgx_version));
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, f) in doc.functions.iter().enumerate() {
        if f.id.is_empty() {
            return Err(CgxError::Schema {
                pointer: format!("/functions/{i}/id"),
                message: "empty function id".into(),
            });
        }
        if ids.insert(&f.id, i).is_some() {
            return Err(CgxError::DuplicateId {
                id: f.id.clone(),
                pointer: format!("/functions/{i}/id"),
            });
        }
    }
    if !ids.contains_key(doc.entry.as_str()) {
        return Err(CgxError::MissingEntry(doc.entry.clone()));
    }
    let check = |id: &str, pointer: String| -> Result<usize, CgxError> {
        ids.get(id).copied().ok_or_else(|| CgxError::Dangling {
            id: id.to_string(),
            pointer,
        })
    };
    let mut seen = HashSet::new();
    for (i, c) in doc.calls.iter().enumerate() {
        let caller = check(&c.caller, format!("/calls/{i}/caller"))?;
        check(&c.callee, format!("/calls/{i}/callee"))?;
        if doc.functions[caller].is_import {
            return Err(CgxError::ImportCalls {
                id: c.caller.clone(),
                pointer: format!("/calls/{i}"),
            });
        }
        if !seen.insert((&c.caller, &c.callee, &c.site)) {
            return Err(CgxError::DuplicateEdge {
                pointer: format!("/calls/{i}"),
            });
        }
    }
    for (i, s) in doc.spawns.iter().enumerate() {
        check(&s.spawner, format!("/spawns/{i}/spawner"))?;
        check(&s.entry, format!("/spawns/{i}/entry"))?;
    }
    for (i, c) in doc.consts.iter().enumerate() {
        let pointer = format!("/consts/{i}/value");
        match (c.kind, &c.value) {
            (ConstKind::Port, ConstValue::Text(_)) => {
                return Err(CgxError::Const {
                    pointer,
                    message: "port constants must be integers".into(),
                })
            }
            (ConstKind::Protocol, v) if !matches!(v.as_text(), Some("tcp" | "udp")) => {
                return Err(CgxError::Const {
                    pointer,
                    message: format!("protocol must be tcp or udp, got {v}"),
                })
            }
            _ => {}
        }
    }
    Ok(CallGraph::new(doc))
}

/// Parses and validates a CGX document.
pub fn ingest_cgx(text: &str) -> Result<CallGraph, CgxError> {
    validate(parse_cgx(text)?)
}

/// Adds `extra` constants to `base`. A heuristic constant never replaces an
/// exact one recorded for the same (site, arg_index, kind); otherwise the
/// later value wins. The result is sorted.
pub fn merge_consts(base: &[ConstArg], extra: &[ConstArg]) -> Vec<ConstArg> {
    let mut by_key: HashMap<(Site, u32, ConstKind), ConstArg> = HashMap::new();
    for c in base.iter().chain(extra) {
        let key = (c.site.clone(), c.arg_index, c.kind);
        match by_key.get(&key) {
            Some(old) if !old.is_heuristic() && c.is_heuristic() => {}
            _ => {
                by_key.insert(key, c.clone());
            }
        }
    }
    let mut out: Vec<_> = by_key.into_values().collect();
    out.sort();
    out
}
