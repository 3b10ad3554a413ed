//! Dense 5-axis tensors, binary masks, statistics and seeded generation.
//!
//! Production latents store `f32`; every reduction accumulates in `f64`.
//! The same code runs on `Tensor<f64>` for verification paths.

mod dims;
mod rng;
mod stats;

use std::fmt::Debug;

pub use dims::Dims;
pub use rng::Rng;
pub use stats::{adain, adain_with, cosine, norm_deviation, stats, AdainScope, TensorStats};

use crate::error::{dim_err, Error, Result};

/// Scalar storage type of a [`Tensor`].
pub trait Element: Copy + Debug + Default + PartialEq + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Element for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Element = f32> {
    dims: Dims,
    data: Vec<T>,
}

/// The production latent type.
pub type LatentTensor = Tensor<f32>;

impl<T: Element> Tensor<T> {
    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return dim_err(format!(
                "data length {} does not match {} ({} elements)",
                data.len(),
                dims,
                dims.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self { dims, data })
    }

    pub(crate) fn from_vec_unchecked(dims: Dims, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Self { dims, data }
    }

    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::filled(dims, T::from_f64(0.0))
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize) -> f64) -> Self {
        let data = (0..dims.len()).map(|i| T::from_f64(f(i))).collect();
        Self { dims, data }
    }

    /// I.i.d. standard-normal samples drawn sequentially from `rng`.
    pub fn gaussian(dims: Dims, rng: &mut Rng) -> Self {
        let data = (0..dims.len())
            .map(|_| T::from_f64(rng.standard_normal()))
            .collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, b: usize, f: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.dims.offset(b, f, c, h, w)]
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| T::from_f64(f(v.to_f64()))).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `a·self + b·other`, evaluated per element in `f64`.
    pub fn affine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| T::from_f64(f(x.to_f64(), y.to_f64())))
            .collect();
        Ok(Self {
            dims: self.dims,
            data,
        })
    }

    pub fn require_same_dims<U: Element>(&self, other: &Tensor<U>) -> Result<()> {
        if self.dims != other.dims {
            return dim_err(format!("shape mismatch {} vs {}", self.dims, other.dims));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// A {0,1} grid with the same 5-axis layout as [`Tensor`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn from_vec(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return dim_err(format!(
                "mask length {} does not match {}",
                data.len(),
                dims
            ));
        }
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::Parameter(format!(
                "mask value {} at flat index {pos} is not 0 or 1",
                data[pos]
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize) -> bool) -> Self {
        let data = (0..dims.len()).map(|i| f(i) as u8).collect();
        Self { dims, data }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0; dims.len()],
        }
    }

    pub fn ones(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![1; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn is_set(&self, flat: usize) -> bool {
        self.data[flat] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count_ones() as f64 / self.data.len() as f64
    }

    pub fn complement(&self) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Repeats a single-channel mask across `channels`.
    pub fn broadcast_channels(&self, channels: usize) -> Result<Self> {
        if self.dims.channels != 1 {
            return dim_err(format!("cannot broadcast mask with {} channels", self.dims.channels));
        }
        let dims = self.dims.with_channels(channels)?;
        let plane = dims.plane();
        let mut data = Vec::with_capacity(dims.len());
        for bf in self.data.chunks(plane) {
            for _ in 0..channels {
                data.extend_from_slice(bf);
            }
        }
        Ok(Self { dims, data })
    }

    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| T::from_f64(v as f64)).collect(),
        }
    }

    /// Interprets a tensor holding exact 0.0/1.0 values as a mask.
    pub fn from_tensor<T: Element>(t: &Tensor<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(t.len());
        for (i, v) in t.as_slice().iter().enumerate() {
            let v = v.to_f64();
            if v == 0.0 {
                data.push(0);
            } else if v == 1.0 {
                data.push(1);
            } else {
                return Err(Error::Parameter(format!(
                    "mask value {v} at flat index {i} is not 0 or 1"
                )));
            }
        }
        Ok(Self { dims: t.dims, data })
    }
}
