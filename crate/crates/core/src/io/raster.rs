//! Image, mask and depth rasters.
//!
//! * RGB: binary PPM (`P6`, maxval 255).
//! * Masks: binary PGM (`P5`, maxval 255); 0 = clear, 255 = set.
//! * Depth: binary PGM with maxval 65535 (big-endian samples, multiplied by a
//!   scale factor) or `F32R`: magic, H and W as u32 LE, then H·W `f32` LE.
//!
//! ASCII variants (`P2`, `P3`) and other maxvals are rejected.

use std::fs;
use std::path::Path;

use crate::error::{dim_err, Error, Result};
use crate::geometry::{DepthMap, Image};
use crate::tensor::{BinaryMask, Dims};

pub const F32R_MAGIC: &[u8; 4] = b"F32R";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Format {
            offset: 0,
            msg: "not a PNM file".into(),
        });
    }
    let magic = [bytes[0], bytes[1]];
    match &magic {
        b"P5" | b"P6" => {}
        b"P1" | b"P2" | b"P3" | b"P4" => {
            return Err(Error::UnsupportedFormat(format!(
                "{} (only binary P5/P6 are supported)",
                String::from_utf8_lossy(&magic)
            )))
        }
        _ => {
            return Err(Error::Format {
                offset: 0,
                msg: "unknown PNM magic".into(),
            })
        }
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos || pos - start > 9 {
            return Err(Error::Format {
                offset: start as u64,
                msg: "expected a header integer".into(),
            });
        }
        *field = std::str::from_utf8(&bytes[start..pos]).unwrap().parse().unwrap();
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format {
            offset: pos as u64,
            msg: "expected whitespace after header".into(),
        });
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format {
            offset: 3,
            msg: "zero image dimension".into(),
        });
    }
    Ok(PnmHeader {
        magic,
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        data_offset: pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], h: &PnmHeader, sample_bytes: usize, channels: usize) -> Result<&'a [u8]> {
    let expected = h.width * h.height * channels * sample_bytes;
    let data = &bytes[h.data_offset.min(bytes.len())..];
    if data.len() < expected {
        return Err(Error::Truncation {
            expected: (h.data_offset + expected) as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(&data[..expected])
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.as_slice().iter().map(|&v| to_u8(v)));
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::UnsupportedFormat("expected P6 for an RGB image".into()));
    }
    if h.maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("PPM maxval {} (only 255)", h.maxval)));
    }
    let data = payload(bytes, &h, 1, 3)?;
    Image::new(h.height, h.width, data.iter().map(|&b| b as f32 / 255.0).collect())
}

pub fn write_image_ppm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    write_bytes(path.as_ref(), &encode_ppm(img))
}

pub fn read_image_ppm(path: impl AsRef<Path>) -> Result<Image> {
    decode_ppm(&read_bytes(path.as_ref())?)
}

/// One frame of a (1, F, 1, H, W) mask as an 8-bit PGM.
pub fn encode_mask_pgm(mask: &BinaryMask, frame: usize) -> Result<Vec<u8>> {
    let d = mask.dims();
    if d.batch != 1 || d.channels != 1 || frame >= d.frames {
        return dim_err(format!("cannot take frame {frame} of mask {d}"));
    }
    let plane = d.plane();
    let mut out = format!("P5\n{} {}\n255\n", d.width, d.height).into_bytes();
    out.extend(mask.as_slice()[frame * plane..(frame + 1) * plane].iter().map(|&v| v * 255));
    Ok(out)
}

/// Samples ≥ 128 read as set.
pub fn decode_mask_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P5" || h.maxval != 255 {
        return Err(Error::UnsupportedFormat("masks must be 8-bit P5".into()));
    }
    let data = payload(bytes, &h, 1, 1)?;
    BinaryMask::from_vec(
        Dims::new(1, 1, 1, h.height, h.width)?,
        data.iter().map(|&b| (b >= 128) as u8).collect(),
    )
}

pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &BinaryMask, frame: usize) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask_pgm(mask, frame)?)
}

pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask_pgm(&read_bytes(path.as_ref())?)
}

pub fn encode_f32r(depth: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * depth.as_slice().len());
    out.extend_from_slice(F32R_MAGIC);
    out.extend_from_slice(&(depth.height() as u32).to_le_bytes());
    out.extend_from_slice(&(depth.width() as u32).to_le_bytes());
    for v in depth.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_f32r(bytes: &[u8]) -> Result<DepthMap> {
    if bytes.len() < 12 {
        return Err(Error::Truncation {
            expected: 12,
            found: bytes.len() as u64,
        });
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if h == 0 || w == 0 {
        return Err(Error::Format {
            offset: 4,
            msg: "zero raster dimension".into(),
        });
    }
    let expected = 12 + 4 * (h as u64) * (w as u64);
    if bytes.len() as u64 != expected {
        return Err(Error::Truncation {
            expected,
            found: bytes.len() as u64,
        });
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    DepthMap::new(h, w, data)
}

/// Depth as a 16-bit PGM; samples are `round(depth / scale)`, invalid pixels 0.
pub fn encode_depth_pgm16(depth: &DepthMap, scale: f64) -> Result<Vec<u8>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!("depth scale must be positive, got {scale}")));
    }
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    for (i, &d) in depth.as_slice().iter().enumerate() {
        let q = if depth.is_valid(i) {
            (d as f64 / scale).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

/// Decodes either depth format; `scale` applies to 16-bit PGM samples only.
pub fn decode_depth(bytes: &[u8], scale: f64) -> Result<DepthMap> {
    if bytes.starts_with(F32R_MAGIC) {
        return decode_f32r(bytes);
    }
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P5" || h.maxval != 65535 {
        return Err(Error::UnsupportedFormat(format!(
            "depth PGM must be P5 with maxval 65535, got {} maxval {}",
            String::from_utf8_lossy(&h.magic),
            h.maxval
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!("depth scale must be positive, got {scale}")));
    }
    let data = payload(bytes, &h, 2, 1)?;
    let values = data
        .chunks_exact(2)
        .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 * scale) as f32)
        .collect();
    DepthMap::new(h.height, h.width, values)
}

pub fn write_depth_f32r(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_f32r(depth))
}

pub fn read_depth(path: impl AsRef<Path>, scale: f64) -> Result<DepthMap> {
    decode_depth(&read_bytes(path.as_ref())?, scale)
}
