//! Latent archive: a 28-byte little-endian header followed by raw `f32` values.
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `KRNR`               |
//! | 4      | 2    | version (1)                |
//! | 6      | 2    | dtype (0 = f32 LE)         |
//! | 8      | 20   | B, F, C, H, W as u32       |
//! | 28     | 4·n  | payload, row-major         |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{BinaryMask, Dims, LatentTensor, Tensor};

pub const MAGIC: &[u8; 4] = b"KRNR";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 0;
pub const HEADER_LEN: usize = 28;

pub fn encode_latent(t: &LatentTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    for d in t.dims().as_array() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn format_err<T>(offset: u64, msg: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        offset,
        msg: msg.into(),
    })
}

pub fn decode_latent(bytes: &[u8]) -> Result<LatentTensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return format_err(0, "bad magic, expected \"KRNR\"");
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncation {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let version = u16_at(4);
    if version != VERSION {
        return format_err(4, format!("unsupported version {version}"));
    }
    let dtype = u16_at(6);
    if dtype != DTYPE_F32 {
        return format_err(6, format!("unsupported dtype tag {dtype}"));
    }
    let mut axes = [0usize; 5];
    for (i, a) in axes.iter_mut().enumerate() {
        *a = u32_at(8 + 4 * i) as usize;
        if *a == 0 {
            return format_err(8 + 4 * i as u64, "zero-length axis");
        }
    }
    let dims = Dims::from_array(axes).map_err(|e| Error::Format {
        offset: 8,
        msg: e.to_string(),
    })?;
    let expected = (HEADER_LEN + 4 * dims.len()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncation {
            expected,
            found: bytes.len() as u64,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::from_vec(dims, data)
}

pub fn write_latent(path: impl AsRef<Path>, t: &LatentTensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_latent(t)).map_err(|e| Error::io(path, e))
}

pub fn read_latent(path: impl AsRef<Path>) -> Result<LatentTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_latent(&bytes)
}

/// Masks travel as archives holding exact 0.0 / 1.0 values.
pub fn write_mask(path: impl AsRef<Path>, m: &BinaryMask) -> Result<()> {
    write_latent(path, &m.to_tensor())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_tensor(&read_latent(path)?)
}
