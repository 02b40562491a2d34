use super::image::FirmwareImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagicKind {
    Uimage,
    Squashfs,
    Jffs2,
    Ubootenv,
    Gzip,
}

impl MagicKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MagicKind::Uimage => "uimage",
            MagicKind::Squashfs => "squashfs",
            MagicKind::Jffs2 => "jffs2",
            MagicKind::Ubootenv => "ubootenv",
            MagicKind::Gzip => "gzip",
        }
    }
}

impl fmt::Display for MagicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MagicHit {
    pub offset: u64,
    pub kind: MagicKind,
    pub confidence: Confidence,
}

const UIMAGE: [u8; 4] = [0x27, 0x05, 0x19, 0x56];
const SQUASHFS_LE: &[u8; 4] = b"hsqs";
const SQUASHFS_BE: &[u8; 4] = b"sqsh";
/// uImage headers and JFFS2 nodes are only recognised on 4-byte boundaries.
const RECORD_ALIGN: usize = 4;
/// U-Boot environments live at the start of an erase block.
const ENV_ALIGN: usize = 0x1000;
const ENV_MIN_PAIRS: usize = 2;
const SCAN_CHUNK: usize = 1 << 20;

/// JFFS2 node types: dirent, inode, clean marker, padding, summary, xattr, xref.
const JFFS2_NODE_TYPES: [u16; 7] = [0xE001, 0xE002, 0x2003, 0x2004, 0x2006, 0xE008, 0xE009];

fn u16_le(d: &[u8], off: usize) -> Option<u16> {
    d.get(off..off + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

fn u16_be(d: &[u8], off: usize) -> Option<u16> {
    d.get(off..off + 2).map(|b| u16::from_be_bytes([b[0], b[1]]))
}

fn u32_le(d: &[u8], off: usize) -> Option<u32> {
    d.get(off..off + 4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn u32_be(d: &[u8], off: usize) -> Option<u32> {
    d.get(off..off + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn jffs2_node_at(d: &[u8], off: usize) -> bool {
    if !off.is_multiple_of(RECORD_ALIGN) {
        return false;
    }
    let le = match d.get(off..off + 2) {
        Some([0x85, 0x19]) => true,
        Some([0x19, 0x85]) => false,
        _ => return false,
    };
    let (node, totlen) = if le {
        (u16_le(d, off + 2), u32_le(d, off + 4))
    } else {
        (u16_be(d, off + 2), u32_be(d, off + 4))
    };
    matches!((node, totlen), (Some(n), Some(len)) if JFFS2_NODE_TYPES.contains(&n) && len >= 12)
}

fn gzip_at(d: &[u8], off: usize) -> bool {
    // deflate method, reserved flag bits clear
    matches!(d.get(off..off + 4), Some([0x1f, 0x8b, 0x08, flags]) if flags & 0xE0 == 0)
}

/// Four header bytes, then at least two printable `KEY=VALUE` strings each
/// terminated by NUL, the list closed by an extra NUL.
fn ubootenv_at(d: &[u8], off: usize) -> bool {
    if !off.is_multiple_of(ENV_ALIGN) {
        return false;
    }
    let mut pos = off + 4;
    let mut pairs = 0;
    loop {
        let Some(&first) = d.get(pos) else {
            return false;
        };
        if first == 0 {
            return pairs >= ENV_MIN_PAIRS;
        }
        let start = pos;
        let mut eq = None;
        loop {
            match d.get(pos) {
                None => return false,
                Some(0) => break,
                Some(b'=') if eq.is_none() => eq = Some(pos),
                Some(&c) if (0x20..0x7f).contains(&c) => {}
                Some(_) => return false,
            }
            pos += 1;
        }
        match eq {
            Some(e) if e > start => pairs += 1,
            _ => return false,
        }
        pos += 1;
    }
}

fn match_at(d: &[u8], off: usize) -> Option<(MagicKind, Confidence)> {
    let head = d.get(off..off + 4);
    if off.is_multiple_of(RECORD_ALIGN) && head == Some(&UIMAGE[..]) {
        return Some((MagicKind::Uimage, Confidence::Exact));
    }
    if head == Some(&SQUASHFS_LE[..]) || head == Some(&SQUASHFS_BE[..]) {
        return Some((MagicKind::Squashfs, Confidence::Exact));
    }
    if jffs2_node_at(d, off) {
        return Some((MagicKind::Jffs2, Confidence::Exact));
    }
    if gzip_at(d, off) {
        return Some((MagicKind::Gzip, Confidence::Exact));
    }
    if ubootenv_at(d, off) {
        return Some((MagicKind::Ubootenv, Confidence::Heuristic));
    }
    None
}

/// Reports every signature occurrence in ascending offset order. Chunks of
/// the image are scanned in parallel; a signature straddling a chunk border
/// is still found because matching reads past the chunk end.
pub fn scan_magics(image: &FirmwareImage) -> Vec<MagicHit> {
    let data = image.bytes();
    let chunks: Vec<usize> = (0..data.len()).step_by(SCAN_CHUNK).collect();
    chunks
        .par_iter()
        .map(|&start| {
            let end = (start + SCAN_CHUNK).min(data.len());
            (start..end)
                .filter_map(|off| {
                    match_at(data, off).map(|(kind, confidence)| MagicHit {
                        offset: off as u64,
                        kind,
                        confidence,
                    })
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

/// Length of the structure starting at `hit`, when its header declares one.
pub(crate) fn declared_extent(data: &[u8], hit: &MagicHit) -> Option<u64> {
    let off = usize::try_from(hit.offset).ok()?;
    match hit.kind {
        MagicKind::Uimage => {
            let size = u32_be(data, off + 12)?;
            Some(super::UIMAGE_HEADER_LEN as u64 + u64::from(size))
        }
        MagicKind::Squashfs => {
            let field = data.get(off + 40..off + 48)?;
            let bytes: [u8; 8] = field.try_into().ok()?;
            if data.get(off..off + 4)? == SQUASHFS_LE {
                Some(u64::from_le_bytes(bytes))
            } else {
                Some(u64::from_be_bytes(bytes))
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(bytes: Vec<u8>) -> FirmwareImage {
        FirmwareImage::from_bytes("test", bytes).unwrap()
    }

    #[test]
    fn all_zero_image_has_no_hits() {
        assert!(scan_magics(&img(vec![0; 3 * SCAN_CHUNK + 17])).is_empty());
    }

    #[test]
    fn squashfs_both_endians() {
        let mut d = vec![0u8; 0x300000];
        d[0x200000..0x200004].copy_from_slice(b"hsqs");
        d[0x280001..0x280005].copy_from_slice(b"sqsh");
        let hits = scan_magics(&img(d));
        assert_eq!(
            hits,
            vec![
                MagicHit { offset: 0x200000, kind: MagicKind::Squashfs, confidence: Confidence::Exact },
                MagicHit { offset: 0x280001, kind: MagicKind::Squashfs, confidence: Confidence::Exact },
            ]
        );
    }

    #[test]
    fn uimage_requires_alignment() {
        let mut d = vec![0u8; 64];
        d[2..6].copy_from_slice(&UIMAGE);
        assert!(scan_magics(&img(d.clone())).is_empty());
        d[8..12].copy_from_slice(&UIMAGE);
        assert_eq!(scan_magics(&img(d))[0].offset, 8);
    }

    #[test]
    fn jffs2_needs_known_node_type() {
        let mut d = vec![0u8; 64];
        d[0..8].copy_from_slice(&[0x85, 0x19, 0x03, 0x20, 0x0c, 0, 0, 0]);
        d[16..24].copy_from_slice(&[0x85, 0x19, 0x77, 0x77, 0x0c, 0, 0, 0]);
        d[32..40].copy_from_slice(&[0x19, 0x85, 0xe0, 0x02, 0, 0, 0, 0x44]);
        let hits = scan_magics(&img(d));
        assert_eq!(hits.iter().map(|h| h.offset).collect::<Vec<_>>(), vec![0, 32]);
        assert!(hits.iter().all(|h| h.kind == MagicKind::Jffs2));
    }

    #[test]
    fn gzip_method_checked() {
        let mut d = vec![0u8; 32];
        d[3..7].copy_from_slice(&[0x1f, 0x8b, 0x08, 0x00]);
        d[20..24].copy_from_slice(&[0x1f, 0x8b, 0x07, 0x00]);
        let hits = scan_magics(&img(d));
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].offset, hits[0].kind), (3, MagicKind::Gzip));
    }

    #[test]
    fn ubootenv_is_heuristic() {
        let mut d = vec![0u8; 0x3000];
        let env = b"\x12\x34\x56\x78bootdelay=1\0baudrate=115200\0\0";
        d[0x1000..0x1000 + env.len()].copy_from_slice(env);
        let hits = scan_magics(&img(d));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].kind, MagicKind::Ubootenv);
        assert_eq!(hits[0].confidence, Confidence::Heuristic);
        assert_eq!(hits[0].offset, 0x1000);
    }

    #[test]
    fn ubootenv_rejects_single_pair_and_binary() {
        let mut d = vec![0u8; 0x2000];
        d[4..4 + 13].copy_from_slice(b"bootdelay=1\0\0");
        d[0x1004..0x1004 + 9].copy_from_slice(b"a=b\0\x01=2\0\0");
        assert!(scan_magics(&img(d)).is_empty());
    }

    #[test]
    fn match_near_end_does_not_panic() {
        let d = vec![0x1f, 0x8b, 0x08];
        assert!(scan_magics(&img(d)).is_empty());
        let d = vec![0x85, 0x19, 0x03];
        assert!(scan_magics(&img(d)).is_empty());
    }

    #[test]
    fn hit_across_chunk_border() {
        let mut d = vec![0u8; SCAN_CHUNK * 2];
        d[SCAN_CHUNK - 2..SCAN_CHUNK + 2].copy_from_slice(b"hsqs");
        let hits = scan_magics(&img(d));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].offset, SCAN_CHUNK as u64 - 2);
    }
}
