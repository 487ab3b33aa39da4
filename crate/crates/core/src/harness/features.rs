//! CRTF frame-feature files.
//!
//! ```text
//! magic   "CRTF"   4 bytes
//! version u16      currently 1
//! frames  u32      N >= 1
//! dim     u32      d_v >= 1
//! payload f32 * N * d_v, row-major
//! ```
//!
//! Integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::VideoClipFeatures;
use crate::tensor::Tensor;

pub const FEATURE_MAGIC: &[u8; 4] = b"CRTF";
pub const FEATURE_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

/// Serializes frames as 32-bit floats.
pub fn encode_features(frames: &Tensor) -> Result<Vec<u8>> {
    let (n, d) = frames.dims2()?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &x in frames.data() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

/// Parses a CRTF buffer; the error string says what was wrong.
pub fn decode_features(bytes: &[u8]) -> std::result::Result<VideoClipFeatures, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(format!("bad magic {:?}", &bytes[..4]));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = u32_at(bytes, 6) as usize;
    let d = u32_at(bytes, 10) as usize;
    if n == 0 || d == 0 {
        return Err(format!("empty feature matrix {n}x{d}"));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| format!("header {n}x{d} overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(format!(
            "payload of {} bytes, header {n}x{d} needs {expected}",
            payload.len()
        ));
    }
    let mut data = Vec::with_capacity(n * d);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes(chunk.try_into().expect("four bytes"));
        if !x.is_finite() {
            return Err(format!("non-finite value at frame {}, dim {}", i / d, i % d));
        }
        data.push(f64::from(x));
    }
    let t = Tensor::new(vec![n, d], data).map_err(|e| e.to_string())?;
    VideoClipFeatures::new(t).map_err(|e| e.to_string())
}

pub fn write_features(path: &Path, frames: &Tensor) -> Result<()> {
    let bytes = encode_features(frames)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<VideoClipFeatures> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
