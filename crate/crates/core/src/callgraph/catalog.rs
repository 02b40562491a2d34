use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

pub const DEFAULT_CATALOG_JSON: &str = include_str!("../../assets/catalog.default.json");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("invalid catalog JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sink '{name}' is listed in both tier '{first}' and tier '{second}'")]
    DuplicateSink {
        name: String,
        first: String,
        second: String,
    },
}

/// Import names grouped into named tiers. Each name belongs to one tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkCatalog {
    pub tiers: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    lookup: HashMap<String, String>,
}

impl SinkCatalog {
    pub fn new(tiers: BTreeMap<String, Vec<String>>) -> Result<Self, CatalogError> {
        let mut lookup: HashMap<String, String> = HashMap::new();
        for (tier, names) in &tiers {
            for name in names {
                if let Some(first) = lookup.get(name) {
                    if first != tier {
                        return Err(CatalogError::DuplicateSink {
                            name: name.clone(),
                            first: first.clone(),
                            second: tier.clone(),
                        });
                    }
                }
                lookup.insert(name.clone(), tier.clone());
            }
        }
        Ok(Self { tiers, lookup })
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            tiers: BTreeMap<String, Vec<String>>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        Self::new(doc.tiers)
    }

    pub fn from_file(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn tier_of(&self, import_name: &str) -> Option<&str> {
        self.lookup.get(import_name).map(String::as_str)
    }
}

impl Default for SinkCatalog {
    fn default() -> Self {
        Self::from_json(DEFAULT_CATALOG_JSON).expect("embedded catalog is valid")
    }
}
