use serde::{Deserialize, Serialize};

use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Population statistics; per-channel entries reduce over (B, F, H, W).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorStats {
    pub mean: f64,
    pub variance: f64,
    pub l2_norm: f64,
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
}

impl TensorStats {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Per-channel (mean, variance), two passes in `f64`.
fn channel_moments<T: Element>(t: &Tensor<T>) -> (Vec<f64>, Vec<f64>) {
    let dims = t.dims();
    let channels = dims.channels;
    let plane = dims.plane();
    let per_channel = (dims.len() / channels) as f64;
    let mut sums = vec![0.0f64; channels];
    for (i, chunk) in t.as_slice().chunks(plane).enumerate() {
        sums[i % channels] += chunk.iter().map(|v| v.to_f64()).sum::<f64>();
    }
    let means: Vec<f64> = sums.iter().map(|s| s / per_channel).collect();
    let mut sq = vec![0.0f64; channels];
    for (i, chunk) in t.as_slice().chunks(plane).enumerate() {
        let m = means[i % channels];
        sq[i % channels] += chunk
            .iter()
            .map(|v| {
                let d = v.to_f64() - m;
                d * d
            })
            .sum::<f64>();
    }
    let vars = sq.iter().map(|s| s / per_channel).collect();
    (means, vars)
}

fn global_moments<T: Element>(t: &Tensor<T>) -> (f64, f64) {
    let n = t.len() as f64;
    let mean = t.as_slice().iter().map(|v| v.to_f64()).sum::<f64>() / n;
    let var = t
        .as_slice()
        .iter()
        .map(|v| {
            let d = v.to_f64() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var)
}

fn l2_norm<T: Element>(t: &Tensor<T>) -> f64 {
    t.as_slice()
        .iter()
        .map(|v| {
            let x = v.to_f64();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

pub fn stats<T: Element>(t: &Tensor<T>) -> TensorStats {
    let (mean, variance) = global_moments(t);
    let (channel_mean, channel_var) = channel_moments(t);
    TensorStats {
        mean,
        variance,
        l2_norm: l2_norm(t),
        channel_mean,
        channel_std: channel_var.into_iter().map(f64::sqrt).collect(),
    }
}

/// ⟨a,b⟩ / (‖a‖·‖b‖), clamped to [-1, 1].
pub fn cosine<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.require_same_dims(b)?;
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (x.to_f64(), y.to_f64());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput(
            "cosine of a zero-norm tensor".into(),
        ));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// |‖t‖₂ − √d|: distance of the norm from the expected norm of a d-dim standard Gaussian.
///
/// Uses √d in place of the exact mean √2·Γ((d+1)/2)/Γ(d/2); the two differ by
/// about 1/(4d) relative.
pub fn norm_deviation<T: Element>(t: &Tensor<T>) -> f64 {
    (l2_norm(t) - (t.len() as f64).sqrt()).abs()
}

/// Granularity of the statistics AdaIN transfers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdainScope {
    #[default]
    PerChannel,
    Global,
}

pub fn adain<T: Element>(content: &Tensor<T>, style: &Tensor<T>) -> Result<Tensor<T>> {
    adain_with(content, style, AdainScope::PerChannel)
}

/// Re-standardizes `content` to carry the mean and standard deviation of `style`.
pub fn adain_with<T: Element>(
    content: &Tensor<T>,
    style: &Tensor<T>,
    scope: AdainScope,
) -> Result<Tensor<T>> {
    content.require_same_dims(style)?;
    let (cm, cv, sm, sv) = match scope {
        AdainScope::PerChannel => {
            let (cm, cv) = channel_moments(content);
            let (sm, sv) = channel_moments(style);
            (cm, cv, sm, sv)
        }
        AdainScope::Global => {
            let (cm, cv) = global_moments(content);
            let (sm, sv) = global_moments(style);
            (vec![cm], vec![cv], vec![sm], vec![sv])
        }
    };
    if let Some(c) = cv.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateInput(format!(
            "content standard deviation is zero (channel {c})"
        )));
    }
    let dims = content.dims();
    let gain: Vec<f64> = cv.iter().zip(&sv).map(|(c, s)| s.sqrt() / c.sqrt()).collect();
    let data = content
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = match scope {
                AdainScope::PerChannel => dims.channel_of(i),
                AdainScope::Global => 0,
            };
            T::from_f64((v.to_f64() - cm[c]) * gain[c] + sm[c])
        })
        .collect();
    Ok(Tensor::from_vec_unchecked(dims, data))
}
