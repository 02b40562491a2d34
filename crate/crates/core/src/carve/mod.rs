//! Raw flash dump handling: read-only loading, magic-signature scanning,
//! partition carving and legacy uImage verification.

mod image;
mod magic;
mod partition;
mod uimage;

pub use image::{load_image, Digest, FirmwareImage, MAX_IMAGE_SIZE};
pub use magic::{scan_magics, Confidence, MagicHit, MagicKind};
pub use partition::{
    carve, check_records, parse_offset_table, write_partitions, CarveResult, Manifest,
    ManifestImage, ManifestPartition, PartitionKind, PartitionRecord, TableEntry,
};
pub use uimage::{verify_uimage, UImageHeader, UIMAGE_HEADER_LEN, UIMAGE_MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CarveError {
    #[error("image not found: {0}")]
    NotFound(String),
    #[error("not a regular file: {0}")]
    NotAFile(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty image: {0}")]
    Empty(String),
    #[error("image {path} is {size} bytes, above the {max} byte limit")]
    TooLarge { path: String, size: u64, max: u64 },
    #[error("offset table: {0}")]
    Table(String),
    #[error("partition '{name}' at {offset:#x} (+{length:#x}) exceeds image size {size:#x}")]
    OutOfRange {
        name: String,
        offset: u64,
        length: u64,
        size: u64,
    },
    #[error("partition '{first}' overlaps '{second}' at {offset:#x}")]
    Overlap {
        first: String,
        second: String,
        offset: u64,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UImageError {
    #[error("wrong magic {0:#010x}")]
    WrongMagic(u32),
    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),
    #[error("data size {size} exceeds partition length {available}")]
    SizeExceedsPartition { size: u64, available: u64 },
}
