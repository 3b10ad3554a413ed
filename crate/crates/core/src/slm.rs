//! Stochastic latent modulation: occluded latent positions are refilled with
//! values drawn uniformly, with replacement, from visible positions of the
//! eligible depth class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Error, Result};
use crate::tensor::{BinaryMask, Dims, Element, Rng, Tensor};

/// S = (1 − M)·D elementwise.
pub fn sampling_mask(m: &BinaryMask, d: &BinaryMask) -> Result<BinaryMask> {
    if m.dims() != d.dims() {
        return dim_err(format!("mask dims {} and {} differ", m.dims(), d.dims()));
    }
    let data = m
        .as_slice()
        .iter()
        .zip(d.as_slice())
        .map(|(&m, &d)| (1 - m) * d)
        .collect();
    BinaryMask::from_vec(m.dims(), data)
}

/// Index space the permutation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationMode {
    /// Positions are (b, f, h, w) cells; a target receives a whole channel vector.
    #[default]
    ChannelCoherent,
    /// Positions are individual (b, f, c, h, w) elements.
    PerElement,
}

#[derive(Debug, Clone)]
pub struct ModulationInputs<T: Element = f32> {
    pub x0: Tensor<T>,
    pub eps_inv: Tensor<T>,
    /// 1 = occluded.
    pub m: BinaryMask,
    /// 1 = eligible source depth class.
    pub d: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct Modulated<T: Element = f32> {
    pub x0: Tensor<T>,
    pub eps_inv: Tensor<T>,
    /// (target, source) position pairs in target order; cell indices in
    /// channel-coherent mode, flat element indices otherwise.
    pub trace: Vec<(usize, usize)>,
}

/// Flattens a mask to one flag per (b, f, h, w) cell. Masks must have one
/// channel or be constant across channels.
fn cell_flags(mask: &BinaryMask, dims: Dims, what: &str) -> Result<Vec<bool>> {
    let md = mask.dims();
    if md.with_channels(1)? != dims.with_channels(1)? || (md.channels != 1 && md.channels != dims.channels) {
        return dim_err(format!("{what} mask dims {md} incompatible with latent {dims}"));
    }
    let src = mask.as_slice();
    let mut out = Vec::with_capacity(md.cells());
    for cell in 0..md.cells() {
        let v = src[md.cell_element(cell, 0)];
        for c in 1..md.channels {
            if src[md.cell_element(cell, c)] != v {
                return param_err(format!(
                    "{what} mask varies across channels at cell {cell}; use per-element mode"
                ));
            }
        }
        out.push(v == 1);
    }
    Ok(out)
}

/// Source draw for the n-th target, independent of evaluation order.
fn draw_sources(rng: &Rng, targets: &[usize], sources: &[usize]) -> Vec<(usize, usize)> {
    targets
        .par_iter()
        .enumerate()
        .map(|(n, &t)| (t, sources[rng.index_at(n as u64, sources.len())]))
        .collect()
}

/// Targets are visited in row-major order; the n-th target uses counter n of `rng`.
/// The same source position feeds both tensors.
pub fn modulate<T: Element>(
    inputs: &ModulationInputs<T>,
    rng: &Rng,
    mode: ModulationMode,
) -> Result<Modulated<T>> {
    let dims = inputs.x0.dims();
    inputs.x0.require_same_dims(&inputs.eps_inv)?;
    if inputs.m.dims() != inputs.d.dims() {
        return dim_err(format!(
            "occlusion mask {} and depth mask {} differ",
            inputs.m.dims(),
            inputs.d.dims()
        ));
    }
    let mut x0 = inputs.x0.clone();
    let mut eps = inputs.eps_inv.clone();
    let trace = match mode {
        ModulationMode::ChannelCoherent => {
            let m = cell_flags(&inputs.m, dims, "occlusion")?;
            let d = cell_flags(&inputs.d, dims, "depth")?;
            let targets: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
            let sources: Vec<usize> = (0..m.len()).filter(|&i| !m[i] && d[i]).collect();
            if targets.is_empty() {
                return Ok(Modulated { x0, eps_inv: eps, trace: Vec::new() });
            }
            if sources.is_empty() {
                return Err(Error::NoVisibleSource { targets: targets.len() });
            }
            let trace = draw_sources(rng, &targets, &sources);
            let (x_src, e_src) = (inputs.x0.as_slice(), inputs.eps_inv.as_slice());
            let (x_dst, e_dst) = (x0.as_mut_slice(), eps.as_mut_slice());
            for &(t, s) in &trace {
                for c in 0..dims.channels {
                    let (ti, si) = (dims.cell_element(t, c), dims.cell_element(s, c));
                    x_dst[ti] = x_src[si];
                    e_dst[ti] = e_src[si];
                }
            }
            trace
        }
        ModulationMode::PerElement => {
            if inputs.m.dims() != dims {
                return dim_err(format!("per-element masks must match latent dims {dims}"));
            }
            let s = sampling_mask(&inputs.m, &inputs.d)?;
            let targets: Vec<usize> = (0..dims.len()).filter(|&i| inputs.m.is_set(i)).collect();
            let sources: Vec<usize> = (0..dims.len()).filter(|&i| s.is_set(i)).collect();
            if targets.is_empty() {
                return Ok(Modulated { x0, eps_inv: eps, trace: Vec::new() });
            }
            if sources.is_empty() {
                return Err(Error::NoVisibleSource { targets: targets.len() });
            }
            let trace = draw_sources(rng, &targets, &sources);
            let (x_src, e_src) = (inputs.x0.as_slice(), inputs.eps_inv.as_slice());
            let (x_dst, e_dst) = (x0.as_mut_slice(), eps.as_mut_slice());
            for &(t, s) in &trace {
                x_dst[t] = x_src[s];
                e_dst[t] = e_src[s];
            }
            trace
        }
    };
    Ok(Modulated {
        x0,
        eps_inv: eps,
        trace,
    })
}
