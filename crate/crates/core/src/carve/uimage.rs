use super::UImageError;
use serde::{Deserialize, Serialize};

pub const UIMAGE_MAGIC: u32 = 0x2705_1956;
pub const UIMAGE_HEADER_LEN: usize = 64;

/// Decoded legacy U-Boot image header plus CRC verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UImageHeader {
    pub header_crc: u32,
    pub header_crc_ok: bool,
    /// Seconds since the Unix epoch.
    pub timestamp: u32,
    pub data_size: u32,
    pub load_addr: u32,
    pub entry_addr: u32,
    pub data_crc: u32,
    pub data_crc_ok: bool,
    pub os: u8,
    pub arch: u8,
    pub image_type: u8,
    pub compression: u8,
    pub name: String,
}

impl UImageHeader {
    pub fn checksum_ok(&self) -> bool {
        self.header_crc_ok && self.data_crc_ok
    }
}

fn be32(b: &[u8], off: usize) -> u32 {
    u32::from_be_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Parses the 64-byte header at the start of `bytes` and checks both CRC32s.
/// The header CRC is computed with its own field zeroed.
pub fn verify_uimage(bytes: &[u8]) -> Result<UImageHeader, UImageError> {
    if bytes.len() < UIMAGE_HEADER_LEN {
        return Err(UImageError::TruncatedHeader(bytes.len()));
    }
    let magic = be32(bytes, 0);
    if magic != UIMAGE_MAGIC {
        return Err(UImageError::WrongMagic(magic));
    }
    let data_size = be32(bytes, 12);
    let available = (bytes.len() - UIMAGE_HEADER_LEN) as u64;
    if u64::from(data_size) > available {
        return Err(UImageError::SizeExceedsPartition {
            size: u64::from(data_size),
            available,
        });
    }

    let header_crc = be32(bytes, 4);
    let mut header = [0u8; UIMAGE_HEADER_LEN];
    header.copy_from_slice(&bytes[..UIMAGE_HEADER_LEN]);
    header[4..8].fill(0);
    let header_crc_ok = crc32fast::hash(&header) == header_crc;

    let data_crc = be32(bytes, 24);
    let payload = &bytes[UIMAGE_HEADER_LEN..UIMAGE_HEADER_LEN + data_size as usize];
    let data_crc_ok = crc32fast::hash(payload) == data_crc;

    let name_field = &bytes[32..64];
    let name_len = name_field.iter().position(|&b| b == 0).unwrap_or(32);
    Ok(UImageHeader {
        header_crc,
        header_crc_ok,
        timestamp: be32(bytes, 8),
        data_size,
        load_addr: be32(bytes, 16),
        entry_addr: be32(bytes, 20),
        data_crc,
        data_crc_ok,
        os: bytes[28],
        arch: bytes[29],
        image_type: bytes[30],
        compression: bytes[31],
        name: String::from_utf8_lossy(&name_field[..name_len]).into_owned(),
    })
}
