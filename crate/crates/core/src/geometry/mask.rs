//! Depth-class masks and pixel-to-latent mask downsampling.

use serde::{Deserialize, Serialize};

use super::image::DepthMap;
use crate::error::{dim_err, param_err, Error, Result};
use crate::tensor::{BinaryMask, Dims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// 1 where depth is beyond the quantile threshold.
    #[default]
    Background,
    /// 1 where depth is at or before the threshold.
    Near,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMask {
    /// Dims (1, 1, 1, H, W).
    pub mask: BinaryMask,
    pub threshold: f64,
    /// Set when all valid depths are equal; the mask is then all ones.
    pub degenerate: bool,
}

/// Linear-interpolated quantile of an unsorted sample (position q·(n−1)).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Thresholds one frame's depth at its `quantile`. Invalid pixels are 0 in both modes.
pub fn near_depth_mask(depth: &DepthMap, mode: DepthMode, q: f64) -> Result<DepthMask> {
    if !(q > 0.0 && q < 1.0) {
        return param_err(format!("quantile must be in (0, 1), got {q}"));
    }
    let dims = Dims::new(1, 1, 1, depth.height(), depth.width())?;
    let valid: Vec<f64> = (0..dims.len())
        .filter(|&i| depth.is_valid(i))
        .map(|i| depth.as_slice()[i] as f64)
        .collect();
    if valid.is_empty() {
        return Err(Error::DegenerateInput("depth map has no valid pixels".into()));
    }
    let lo = valid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(DepthMask {
            mask: BinaryMask::ones(dims),
            threshold: lo,
            degenerate: true,
        });
    }
    let threshold = quantile(&valid, q);
    let mask = BinaryMask::from_fn(dims, |i| {
        if !depth.is_valid(i) {
            return false;
        }
        let d = depth.as_slice()[i] as f64;
        match mode {
            DepthMode::Background => d > threshold,
            DepthMode::Near => d <= threshold,
        }
    });
    Ok(DepthMask {
        mask,
        threshold,
        degenerate: false,
    })
}

/// Stacks per-frame (1, 1, 1, H, W) masks into (1, F, 1, H, W).
pub fn stack_masks(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Dimension("no masks to stack".into()))?;
    let d = first.dims();
    let mut data = Vec::with_capacity(d.len() * masks.len());
    for m in masks {
        if m.dims() != d {
            return dim_err(format!("mask dims {} differ from {}", m.dims(), d));
        }
        data.extend_from_slice(m.as_slice());
    }
    BinaryMask::from_vec(Dims::new(1, masks.len(), 1, d.height, d.width)?, data)
}

pub const DEFAULT_MASK_THRESHOLD: f64 = 0.5;

/// Pixel mask (B, F, 1, H, W) to latent mask (B, F/t, C, H/s, W/s).
///
/// A latent cell is set iff the fraction of set pixels in its s×s×t block is at least
/// `threshold`; the result is repeated over `channels`.
pub fn downsample_mask_to_latent(
    mask: &BinaryMask,
    spatial: usize,
    temporal: usize,
    threshold: f64,
    channels: usize,
) -> Result<BinaryMask> {
    let d = mask.dims();
    if d.channels != 1 {
        return dim_err(format!("pixel mask must have one channel, got {}", d.channels));
    }
    if spatial == 0 || temporal == 0 {
        return param_err("compression factors must be positive");
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return param_err(format!("threshold must be in (0, 1], got {threshold}"));
    }
    if !d.height.is_multiple_of(spatial) || !d.width.is_multiple_of(spatial) || !d.frames.is_multiple_of(temporal) {
        return dim_err(format!(
            "mask {d} not divisible by spatial factor {spatial} and temporal factor {temporal}"
        ));
    }
    let (lf, lh, lw) = (d.frames / temporal, d.height / spatial, d.width / spatial);
    let block = (spatial * spatial * temporal) as f64;
    let single = Dims::new(d.batch, lf, 1, lh, lw)?;
    let src = mask.as_slice();
    let out = BinaryMask::from_fn(single, |cell| {
        let w = cell % lw;
        let h = (cell / lw) % lh;
        let f = (cell / (lw * lh)) % lf;
        let b = cell / (lw * lh * lf);
        let mut count = 0usize;
        for df in 0..temporal {
            for dh in 0..spatial {
                let row = d.offset(b, f * temporal + df, 0, h * spatial + dh, w * spatial);
                count += src[row..row + spatial].iter().map(|&v| v as usize).sum::<usize>();
            }
        }
        count as f64 / block >= threshold
    });
    out.broadcast_channels(channels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_background() {
        let depth = DepthMap::from_fn(4, 4, |r, _| if r < 2 { 1.0 } else { 10.0 });
        let bg = near_depth_mask(&depth, DepthMode::Background, 0.5).unwrap();
        assert!(!bg.degenerate);
        for i in 0..16 {
            assert_eq!(bg.mask.is_set(i), i >= 8);
        }
        let near = near_depth_mask(&depth, DepthMode::Near, 0.5).unwrap();
        assert_eq!(near.mask, bg.mask.complement());
    }

    #[test]
    fn ramp_counts() {
        let (h, w) = (100, 10);
        let depth = DepthMap::from_fn(h, w, |r, _| (r as f32 + 0.5) / h as f32);
        let m = near_depth_mask(&depth, DepthMode::Background, 0.6).unwrap();
        let rows = m.mask.count_ones() as f64 / w as f64;
        assert!((rows - 40.0).abs() <= 1.0, "{rows}");
    }

    #[test]
    fn constant_depth_warns() {
        let m = near_depth_mask(&DepthMap::constant(3, 3, 2.0), DepthMode::Background, 0.5).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.mask.count_ones(), 9);
        let m = near_depth_mask(&DepthMap::constant(3, 3, 2.0), DepthMode::Near, 0.5).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.mask.count_ones(), 9);
    }

    #[test]
    fn quantile_bounds() {
        let depth = DepthMap::constant(2, 2, 1.0);
        assert!(near_depth_mask(&depth, DepthMode::Near, 0.0).is_err());
        assert!(near_depth_mask(&depth, DepthMode::Near, 1.0).is_err());
    }

    #[test]
    fn downsample_trivial() {
        let d = Dims::new(1, 8, 1, 16, 24).unwrap();
        let ones = downsample_mask_to_latent(&BinaryMask::ones(d), 8, 4, 0.5, 16).unwrap();
        assert_eq!(ones.dims(), Dims::new(1, 2, 16, 2, 3).unwrap());
        assert_eq!(ones.count_ones(), ones.dims().len());
        let zeros = downsample_mask_to_latent(&BinaryMask::zeros(d), 8, 4, 0.5, 16).unwrap();
        assert_eq!(zeros.count_ones(), 0);
    }

    #[test]
    fn half_block_is_inclusive() {
        let d = Dims::new(1, 4, 1, 8, 8).unwrap();
        let half = BinaryMask::from_fn(d, |i| (i % 8) < 4);
        let out = downsample_mask_to_latent(&half, 8, 4, 0.5, 1).unwrap();
        assert_eq!(out.as_slice(), &[1]);
        let just_under = BinaryMask::from_fn(d, |i| (i % 8) < 4 && i != 0);
        let out = downsample_mask_to_latent(&just_under, 8, 4, 0.5, 1).unwrap();
        assert_eq!(out.as_slice(), &[0]);
    }

    #[test]
    fn downsample_non_divisible() {
        let d = Dims::new(1, 4, 1, 12, 8).unwrap();
        let err = downsample_mask_to_latent(&BinaryMask::ones(d), 8, 4, 0.5, 1).unwrap_err();
        assert_eq!(err.category(), "dimension");
    }

    #[test]
    fn stacking() {
        let a = BinaryMask::ones(Dims::new(1, 1, 1, 2, 2).unwrap());
        let b = BinaryMask::zeros(Dims::new(1, 1, 1, 2, 2).unwrap());
        let s = stack_masks(&[a, b]).unwrap();
        assert_eq!(s.dims(), Dims::new(1, 2, 1, 2, 2).unwrap());
        assert_eq!(s.as_slice(), &[1, 1, 1, 1, 0, 0, 0, 0]);
    }
}
