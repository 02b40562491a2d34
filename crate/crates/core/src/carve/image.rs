use super::CarveError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Largest accepted dump (SPI flash scale).
pub const MAX_IMAGE_SIZE: u64 = 256 * 1024 * 1024;

/// A SHA-256 digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Digest(out))
    }
}

/// An immutable flash dump. The contents cannot be modified after loading;
/// clones share the same buffer.
#[derive(Clone)]
pub struct FirmwareImage {
    source_path: PathBuf,
    bytes: Arc<[u8]>,
    sha256: Digest,
}

impl fmt::Debug for FirmwareImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirmwareImage")
            .field("source_path", &self.source_path)
            .field("size_bytes", &self.size_bytes())
            .field("sha256", &self.sha256)
            .finish()
    }
}

impl FirmwareImage {
    /// Wraps an in-memory buffer. Applies the same empty/size checks as
    /// [`load_image`].
    pub fn from_bytes(source_path: impl Into<PathBuf>, bytes: Vec<u8>) -> Result<Self, CarveError> {
        let source_path = source_path.into();
        let display = source_path.display().to_string();
        if bytes.is_empty() {
            return Err(CarveError::Empty(display));
        }
        if bytes.len() as u64 > MAX_IMAGE_SIZE {
            return Err(CarveError::TooLarge {
                path: display,
                size: bytes.len() as u64,
                max: MAX_IMAGE_SIZE,
            });
        }
        let sha256 = Digest::of(&bytes);
        Ok(Self {
            source_path,
            bytes: bytes.into(),
            sha256,
        })
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    pub fn size_bytes(&self) -> u64 {
        self.bytes.len() as u64
    }

    pub fn sha256(&self) -> Digest {
        self.sha256
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// `bytes[offset .. offset + length]`, or `None` when out of range.
    pub fn range(&self, offset: u64, length: u64) -> Option<&[u8]> {
        let start = usize::try_from(offset).ok()?;
        let end = start.checked_add(usize::try_from(length).ok()?)?;
        self.bytes.get(start..end)
    }
}

/// Loads a dump from disk and digests it.
pub fn load_image(path: &Path) -> Result<FirmwareImage, CarveError> {
    let display = path.display().to_string();
    let meta = std::fs::metadata(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CarveError::NotFound(display.clone())
        } else {
            CarveError::Io {
                path: display.clone(),
                source,
            }
        }
    })?;
    if !meta.is_file() {
        return Err(CarveError::NotAFile(display));
    }
    if meta.len() == 0 {
        return Err(CarveError::Empty(display));
    }
    if meta.len() > MAX_IMAGE_SIZE {
        return Err(CarveError::TooLarge {
            path: display,
            size: meta.len(),
            max: MAX_IMAGE_SIZE,
        });
    }
    let bytes = std::fs::read(path).map_err(|source| CarveError::Io {
        path: display,
        source,
    })?;
    FirmwareImage::from_bytes(path, bytes)
}
