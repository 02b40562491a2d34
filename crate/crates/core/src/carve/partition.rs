use super::image::{Digest, FirmwareImage};
use super::magic::{declared_extent, Confidence, MagicHit, MagicKind};
use super::uimage::verify_uimage;
use super::CarveError;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Uimage,
    Squashfs,
    Jffs2,
    Ubootenv,
    Gzip,
    Opaque,
}

impl PartitionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionKind::Uimage => "uimage",
            PartitionKind::Squashfs => "squashfs",
            PartitionKind::Jffs2 => "jffs2",
            PartitionKind::Ubootenv => "ubootenv",
            PartitionKind::Gzip => "gzip",
            PartitionKind::Opaque => "opaque",
        }
    }
}

impl From<MagicKind> for PartitionKind {
    fn from(k: MagicKind) -> Self {
        match k {
            MagicKind::Uimage => PartitionKind::Uimage,
            MagicKind::Squashfs => PartitionKind::Squashfs,
            MagicKind::Jffs2 => PartitionKind::Jffs2,
            MagicKind::Ubootenv => PartitionKind::Ubootenv,
            MagicKind::Gzip => PartitionKind::Gzip,
        }
    }
}

impl fmt::Display for PartitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: PartitionKind,
    pub offset: u64,
    pub length: u64,
    pub sha256: Digest,
    /// uImage CRC verdict; `None` for other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum_ok: Option<bool>,
}

impl PartitionRecord {
    pub fn end(&self) -> u64 {
        self.offset + self.length
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }
}

/// One row of an explicit offset table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    #[serde(deserialize_with = "flexible_u64")]
    pub offset: u64,
    #[serde(default, deserialize_with = "flexible_opt_u64", skip_serializing_if = "Option::is_none")]
    pub length: Option<u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrText {
    Num(u64),
    Text(String),
}

fn parse_number(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|_| format!("invalid number '{s}'"))
}

fn flexible_u64<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    match NumOrText::deserialize(d)? {
        NumOrText::Num(n) => Ok(n),
        NumOrText::Text(s) => parse_number(&s).map_err(de::Error::custom),
    }
}

fn flexible_opt_u64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    flexible_u64(d).map(Some)
}

/// Parses a JSON offset table: `[{"name", "offset", "length"?}]`, numbers
/// given either as integers or as decimal / `0x` hex strings.
pub fn parse_offset_table(json: &str) -> Result<Vec<TableEntry>, CarveError> {
    serde_json::from_str(json).map_err(|e| CarveError::Table(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarveResult {
    /// Sorted, disjoint, in-bounds partitions.
    pub records: Vec<PartitionRecord>,
    /// Scanned hits that did not start a partition: hits inside a declared
    /// table entry, nested inside a structure of known length, continuation
    /// JFFS2 nodes, and heuristic hits.
    pub informational: Vec<MagicHit>,
}

fn make_record(
    image: &FirmwareImage,
    name: Option<String>,
    kind: PartitionKind,
    offset: u64,
    length: u64,
) -> PartitionRecord {
    let bytes = image
        .range(offset, length)
        .expect("partition bounds validated before carving");
    let checksum_ok = match kind {
        PartitionKind::Uimage => Some(verify_uimage(bytes).map(|h| h.checksum_ok()).unwrap_or(false)),
        _ => None,
    };
    PartitionRecord {
        name,
        kind,
        offset,
        length,
        sha256: Digest::of(bytes),
        checksum_ok,
    }
}

/// Splits `image` into partitions.
///
/// With a `table`, its entries define the partitions and are typed by any
/// exact hit at their start offset; every hit is then informational. Without
/// one, each exact hit opens a partition that runs to the next boundary or
/// the end of the image. Heuristic hits never open a partition.
pub fn carve(
    image: &FirmwareImage,
    hits: &[MagicHit],
    table: Option<&[TableEntry]>,
) -> Result<CarveResult, CarveError> {
    let size = image.size_bytes();
    for h in hits {
        if h.offset >= size {
            return Err(CarveError::OutOfRange {
                name: h.kind.to_string(),
                offset: h.offset,
                length: 0,
                size,
            });
        }
    }
    let mut hits = hits.to_vec();
    hits.sort();
    hits.dedup();

    let result = match table {
        Some(table) => carve_table(image, &hits, table)?,
        None => carve_hits(image, &hits),
    };
    debug_assert!(check_records(&result.records, size).is_ok());
    Ok(result)
}

fn carve_table(
    image: &FirmwareImage,
    hits: &[MagicHit],
    table: &[TableEntry],
) -> Result<CarveResult, CarveError> {
    let size = image.size_bytes();
    let mut entries: Vec<&TableEntry> = table.iter().collect();
    entries.sort_by_key(|e| e.offset);
    if entries.is_empty() {
        return Err(CarveError::Table("offset table is empty".into()));
    }

    let mut spans = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let next = entries.get(i + 1).map(|n| n.offset).unwrap_or(size);
        let length = e.length.unwrap_or_else(|| next.saturating_sub(e.offset));
        let end = e.offset.checked_add(length);
        if e.offset >= size || length == 0 || end.is_none_or(|end| end > size) {
            return Err(CarveError::OutOfRange {
                name: e.name.clone(),
                offset: e.offset,
                length,
                size,
            });
        }
        if let Some(n) = entries.get(i + 1) {
            if e.offset + length > n.offset {
                return Err(CarveError::Overlap {
                    first: e.name.clone(),
                    second: n.name.clone(),
                    offset: n.offset,
                });
            }
        }
        spans.push((e.name.clone(), e.offset, length));
    }

    let records = spans
        .into_iter()
        .map(|(name, offset, length)| {
            let kind = hits
                .iter()
                .find(|h| h.offset == offset && h.confidence == Confidence::Exact)
                .map(|h| PartitionKind::from(h.kind))
                .unwrap_or(PartitionKind::Opaque);
            make_record(image, Some(name), kind, offset, length)
        })
        .collect();
    Ok(CarveResult {
        records,
        informational: hits.to_vec(),
    })
}

fn carve_hits(image: &FirmwareImage, hits: &[MagicHit]) -> CarveResult {
    let data = image.bytes();
    let mut boundaries: Vec<MagicHit> = Vec::new();
    let mut informational = Vec::new();
    // end of the last boundary's declared structure, when known
    let mut covered_until = 0u64;

    for h in hits {
        let prev_kind = boundaries.last().map(|b| b.kind);
        let nested = h.offset < covered_until;
        let jffs2_run = h.kind == MagicKind::Jffs2 && prev_kind == Some(MagicKind::Jffs2);
        if h.confidence != Confidence::Exact || nested || jffs2_run {
            informational.push(*h);
            continue;
        }
        covered_until = declared_extent(data, h)
            .map(|len| h.offset.saturating_add(len))
            .unwrap_or(h.offset);
        boundaries.push(*h);
    }

    let size = image.size_bytes();
    let records = boundaries
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let end = boundaries.get(i + 1).map(|n| n.offset).unwrap_or(size);
            make_record(image, None, b.kind.into(), b.offset, end - b.offset)
        })
        .collect();
    CarveResult {
        records,
        informational,
    }
}

/// Checks the record invariants: non-empty, in bounds, sorted, disjoint.
pub fn check_records(records: &[PartitionRecord], image_size: u64) -> Result<(), String> {
    for (i, r) in records.iter().enumerate() {
        if r.length == 0 {
            return Err(format!("record {i} is empty"));
        }
        if r.offset.checked_add(r.length).is_none_or(|e| e > image_size) {
            return Err(format!("record {i} exceeds the image"));
        }
        if let Some(n) = records.get(i + 1) {
            if n.offset < r.end() {
                return Err(format!("records {i} and {} overlap or are unsorted", i + 1));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub source_path: String,
    pub size_bytes: u64,
    pub sha256: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPartition {
    pub file: String,
    #[serde(flatten)]
    pub record: PartitionRecord,
}

/// Contents of `manifest.json` written next to carved partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub image: ManifestImage,
    pub partitions: Vec<ManifestPartition>,
    pub informational: Vec<MagicHit>,
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

/// Writes `<index>_<name|kind>.bin` for each record plus `manifest.json`.
pub fn write_partitions(
    image: &FirmwareImage,
    result: &CarveResult,
    out_dir: &Path,
) -> std::io::Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut partitions = Vec::with_capacity(result.records.len());
    for (i, r) in result.records.iter().enumerate() {
        let file = format!("{i}_{}.bin", file_stem(r.label()));
        let bytes = image.range(r.offset, r.length).ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "record outside image")
        })?;
        std::fs::write(out_dir.join(&file), bytes)?;
        partitions.push(ManifestPartition {
            file,
            record: r.clone(),
        });
    }
    let manifest = Manifest {
        tool_version: crate::TOOL_VERSION.to_string(),
        image: ManifestImage {
            source_path: image.source_path().display().to_string(),
            size_bytes: image.size_bytes(),
            sha256: image.sha256(),
        },
        partitions,
        informational: result.informational.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    json.push('\n');
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}
