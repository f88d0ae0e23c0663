//! FSVF: a minimal little-endian container for one feature sequence.
//!
//! ```text
//! "FSVF" | u32 version=1 | u32 T | u32 C_in | T*C_in f32, frame-major
//! ```

use std::fs;
use std::path::Path;

use crate::data::FeatureSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FSVF_MAGIC: [u8; 4] = *b"FSVF";
pub const FSVF_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn write_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let frames = seq.frames();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * frames.as_slice().len());
    buf.extend_from_slice(&FSVF_MAGIC);
    buf.extend_from_slice(&FSVF_VERSION.to_le_bytes());
    buf.extend_from_slice(&dim_u32(frames.rows())?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(frames.cols())?.to_le_bytes());
    for (i, &v) in frames.as_slice().iter().enumerate() {
        let single = v as f32;
        if !single.is_finite() {
            return Err(Error::Validation(format!(
                "{}: value {v} at frame {}, dim {} is not representable as a finite f32",
                seq.video_id(),
                i / frames.cols(),
                i % frames.cols()
            )));
        }
        buf.extend_from_slice(&single.to_le_bytes());
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Reads the frame matrix of an FSVF file (widened to `f64`).
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        if n == 4 && found != FSVF_MAGIC {
            return Err(Error::Format {
                path: path.into(),
                found,
                expected: FSVF_MAGIC,
            });
        }
        return Err(Error::Length {
            path: path.into(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != FSVF_MAGIC {
        return Err(Error::Format {
            path: path.into(),
            found: magic,
            expected: FSVF_MAGIC,
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FSVF_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version,
        });
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    if rows == 0 || cols == 0 {
        return Err(Error::Validation(format!(
            "{}: header declares empty shape {rows}x{cols}",
            path.display()
        )));
    }
    let payload = (rows as u64) * (cols as u64) * 4;
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if actual != payload {
        return Err(Error::Length {
            path: path.into(),
            expected: payload,
            actual,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Validation(format!("dimension {n} exceeds u32")))
}
