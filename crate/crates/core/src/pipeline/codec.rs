//! Linear stand-in for a video autoencoder with the same shape contract.
//!
//! Each 8×8-pixel, 4-frame RGB block (768 values) is projected onto 16 fixed
//! orthonormal vectors. Three of them are the per-color block means, the rest are
//! seeded Gaussian directions orthogonalized against everything before them.
//! `encode(decode(z)) = z` for any latent; `decode(encode(v)) = v` for `v` in the
//! span of the basis, which includes every tile-constant video.

use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::geometry::Image;
use crate::tensor::{BinaryMask, Dims, LatentTensor, Rng, Tensor};

pub const SPATIAL: usize = 8;
pub const TEMPORAL: usize = 4;
pub const LATENT_CHANNELS: usize = 16;
const BLOCK: usize = SPATIAL * SPATIAL * TEMPORAL * 3;

/// (1, F/4, 16, H/8, W/8).
pub fn latent_dims(frames: usize, height: usize, width: usize) -> Result<Dims> {
    if !frames.is_multiple_of(TEMPORAL) || !height.is_multiple_of(SPATIAL) || !width.is_multiple_of(SPATIAL) {
        return dim_err(format!(
            "video {frames}x{height}x{width} needs F divisible by {TEMPORAL} and H, W divisible by {SPATIAL}"
        ));
    }
    Dims::new(1, frames / TEMPORAL, LATENT_CHANNELS, height / SPATIAL, width / SPATIAL)
}

#[derive(Debug, Clone)]
pub struct ToyCodec {
    /// LATENT_CHANNELS rows of length BLOCK.
    basis: Vec<Vec<f64>>,
}

impl Default for ToyCodec {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Offset inside a block of (frame, row, col, color).
fn block_index(df: usize, dh: usize, dw: usize, color: usize) -> usize {
    ((df * SPATIAL + dh) * SPATIAL + dw) * 3 + color
}

impl ToyCodec {
    pub fn new(seed: u64) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(LATENT_CHANNELS);
        let per_color = (BLOCK / 3) as f64;
        for color in 0..3 {
            let mut v = vec![0.0; BLOCK];
            for i in (color..BLOCK).step_by(3) {
                v[i] = 1.0 / per_color.sqrt();
            }
            basis.push(v);
        }
        let mut rng = Rng::for_purpose(seed, "codec/basis");
        while basis.len() < LATENT_CHANNELS {
            let mut v: Vec<f64> = (0..BLOCK).map(|_| rng.standard_normal()).collect();
            // Two Gram-Schmidt passes keep the basis orthonormal to ~1e-16.
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        Self { basis }
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn encode(&self, frames: &[Image]) -> Result<LatentTensor> {
        let (h, w) = check_video(frames)?;
        let dims = latent_dims(frames.len(), h, w)?;
        let (lh, lw) = (dims.height, dims.width);
        let planes: Vec<Vec<f32>> = (0..dims.frames)
            .into_par_iter()
            .map(|lf| {
                let mut plane = vec![0.0f32; LATENT_CHANNELS * lh * lw];
                let mut block = vec![0.0f64; BLOCK];
                for bh in 0..lh {
                    for bw in 0..lw {
                        for df in 0..TEMPORAL {
                            let img = &frames[lf * TEMPORAL + df];
                            for dh in 0..SPATIAL {
                                for dw in 0..SPATIAL {
                                    let p = img.pixel(bh * SPATIAL + dh, bw * SPATIAL + dw);
                                    for (color, v) in p.iter().enumerate() {
                                        block[block_index(df, dh, dw, color)] = *v as f64;
                                    }
                                }
                            }
                        }
                        for (c, b) in self.basis.iter().enumerate() {
                            let z: f64 = block.iter().zip(b).map(|(x, y)| x * y).sum();
                            plane[(c * lh + bh) * lw + bw] = z as f32;
                        }
                    }
                }
                plane
            })
            .collect();
        Tensor::from_vec(dims, planes.concat())
    }

    pub fn decode(&self, latent: &LatentTensor) -> Result<Vec<Image>> {
        let d = latent.dims();
        if d.batch != 1 || d.channels != LATENT_CHANNELS {
            return dim_err(format!("toy latent must be (1, F, {LATENT_CHANNELS}, H, W), got {d}"));
        }
        let (lh, lw) = (d.height, d.width);
        let (h, w) = (lh * SPATIAL, lw * SPATIAL);
        let z = latent.as_slice();
        let groups: Vec<Vec<Image>> = (0..d.frames)
            .into_par_iter()
            .map(|lf| {
                let mut out: Vec<Image> = (0..TEMPORAL).map(|_| Image::black(h, w)).collect();
                let mut block = vec![0.0f64; BLOCK];
                for bh in 0..lh {
                    for bw in 0..lw {
                        block.iter_mut().for_each(|v| *v = 0.0);
                        for (c, b) in self.basis.iter().enumerate() {
                            let coef = z[d.offset(0, lf, c, bh, bw)] as f64;
                            block.iter_mut().zip(b).for_each(|(v, e)| *v += coef * e);
                        }
                        for (df, img) in out.iter_mut().enumerate() {
                            for dh in 0..SPATIAL {
                                for dw in 0..SPATIAL {
                                    let i = block_index(df, dh, dw, 0);
                                    let rgb = [block[i] as f32, block[i + 1] as f32, block[i + 2] as f32];
                                    img.set_pixel(bh * SPATIAL + dh, bw * SPATIAL + dw, rgb);
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        Ok(groups.into_iter().flatten().collect())
    }
}

fn check_video(frames: &[Image]) -> Result<(usize, usize)> {
    let first = frames.first().ok_or_else(|| Error::Dimension("empty video".into()))?;
    let (h, w) = (first.height(), first.width());
    if frames.iter().any(|f| f.height() != h || f.width() != w) {
        return dim_err("frames differ in size");
    }
    Ok((h, w))
}

/// PSNR in dB with peak 1 over pixels where `exclude` is 0 (all pixels if `None`).
/// `exclude` has dims (1, F, 1, H, W). Identical inputs report [`PSNR_CAP`].
pub fn psnr(a: &[Image], b: &[Image], exclude: Option<&BinaryMask>) -> Result<f64> {
    let (h, w) = check_video(a)?;
    if a.len() != b.len() || check_video(b)? != (h, w) {
        return dim_err("videos differ in shape");
    }
    if let Some(m) = exclude {
        if m.dims() != Dims::new(1, a.len(), 1, h, w)? {
            return dim_err(format!("mask {} does not match video", m.dims()));
        }
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (f, (x, y)) in a.iter().zip(b).enumerate() {
        for p in 0..h * w {
            if exclude.is_some_and(|m| m.is_set(f * h * w + p)) {
                continue;
            }
            let (px, py) = (x.pixel_at(p), y.pixel_at(p));
            for k in 0..3 {
                let e = px[k] as f64 - py[k] as f64;
                sum += e * e;
            }
            count += 3;
        }
    }
    if count == 0 {
        return Err(Error::DegenerateInput("no pixels left to compare".into()));
    }
    Ok(psnr_from_mse(sum / count as f64))
}

pub const PSNR_CAP: f64 = 200.0;

pub fn psnr_from_mse(mse: f64) -> f64 {
    (-10.0 * mse.max(1e-20).log10()).min(PSNR_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::scene::{make_toy_scene, ToySceneKind};

    #[test]
    fn shape_contract() {
        assert_eq!(latent_dims(16, 480, 720).unwrap().as_array(), [1, 4, 16, 60, 90]);
        assert_eq!(latent_dims(16, 64, 64).unwrap().as_array(), [1, 4, 16, 8, 8]);
        assert_eq!(latent_dims(15, 64, 64).unwrap_err().category(), "dimension");
    }

    #[test]
    fn basis_is_orthonormal() {
        let codec = ToyCodec::default();
        for (i, a) in codec.basis().iter().enumerate() {
            for (j, b) in codec.basis().iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encode_decode_latent() {
        let codec = ToyCodec::default();
        let dims = latent_dims(8, 16, 24).unwrap();
        let z = Tensor::gaussian(dims, &mut Rng::new(4, 0));
        let back = codec.encode(&codec.decode(&z).unwrap()).unwrap();
        assert!(back.max_abs_diff(&z) < 1e-6);
    }

    #[test]
    fn decode_encode_on_tiles() {
        let codec = ToyCodec::default();
        let scene = make_toy_scene(ToySceneKind::TwoLayerParallax, 8, 32, 32, 2).unwrap();
        let back = codec.decode(&codec.encode(&scene.frames).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&scene.frames) {
            let err = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max);
            assert!(err <= 1e-6, "{err}");
        }
    }

    #[test]
    fn psnr_values() {
        let a = vec![Image::black(2, 2)];
        let b = vec![Image::from_fn(2, 2, |_, _| [0.1; 3])];
        assert!((psnr(&a, &b, None).unwrap() - 20.0).abs() < 1e-5);
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);
        let all = BinaryMask::ones(Dims::new(1, 1, 1, 2, 2).unwrap());
        assert!(psnr(&a, &b, Some(&all)).is_err());
    }
}
