//! FTZ: a minimal binary feature-matrix format.
//!
//! Layout, all multi-byte integers little-endian:
//!
//! ```text
//! bytes 0..4   magic "FTZ1"
//! bytes 4..8   channels, u32
//! bytes 8..12  samples, u32
//! byte  12     dtype tag: 0 = f32 LE, 1 = f64 LE
//! bytes 13..   row-major payload, channel by channel
//! ```
//!
//! The header must account for the remaining byte length exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature::FeatureMatrix;

const MAGIC: &[u8; 4] = b"FTZ1";
const HEADER_LEN: usize = 13;

/// Stored element precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(Error::UnknownDtype(other)),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// Serialize a feature matrix. Writing at `Dtype::F32` quantizes each entry
/// to single precision.
pub fn write_ftz(f: &FeatureMatrix, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(HEADER_LEN + f.data().len() * dtype.width());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(f.channels() as u32).to_le_bytes());
    bytes.extend_from_slice(&(f.samples() as u32).to_le_bytes());
    bytes.push(dtype.tag());
    match dtype {
        Dtype::F32 => {
            for &v in f.data() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in f.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Deserialize a feature matrix, upcasting f32 payloads to the internal
/// double precision.
pub fn read_ftz(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let channels = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let samples = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dtype = Dtype::from_tag(bytes[12])?;
    let declared = channels
        .checked_mul(samples)
        .and_then(|c| c.checked_mul(dtype.width()))
        .ok_or_else(|| Error::InvalidArgument("FTZ header shape overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < declared {
        return Err(Error::Truncated { expected: declared, found: payload.len() });
    }
    if payload.len() != declared {
        return Err(Error::SizeMismatch { declared, actual: payload.len() });
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    FeatureMatrix::new(channels, samples, data)
}
