//! Shared layout for the binary file formats: 4 magic bytes, a little-endian
//! `u32` header length, a UTF-8 JSON header, then a raw little-endian payload.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

/// Version written into every file header. Readers reject anything else.
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on the JSON header size; anything bigger is treated as corrupt.
const MAX_HEADER_LEN: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("header of {0} bytes exceeds limit")]
    HeaderTooLarge(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("payload has {found} values, header implies {expected}")]
    PayloadSize { expected: usize, found: usize },
    #[error("invalid contents: {0}")]
    Invalid(String),
}

pub fn write_header<W: Write, H: Serialize>(
    w: &mut W,
    magic: [u8; 4],
    header: &H,
) -> Result<(), FormatError> {
    let json = serde_json::to_vec(header)?;
    w.write_all(&magic)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

pub fn read_header<R: Read, H: DeserializeOwned>(
    r: &mut R,
    magic: [u8; 4],
) -> Result<H, FormatError> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if found != magic {
        return Err(FormatError::BadMagic {
            expected: magic,
            found,
        });
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER_LEN {
        return Err(FormatError::HeaderTooLarge(len));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    Ok(serde_json::from_slice(&json)?)
}

pub fn check_version(found: u32) -> Result<(), FormatError> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(FormatError::Version { found })
    }
}

pub fn write_f32s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f32>) -> io::Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 1 << 16 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)
}

/// Reads exactly `count` little-endian `f32` values and fails if more follow.
pub fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(FormatError::PayloadSize {
            expected: count,
            found: bytes.len() / 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
