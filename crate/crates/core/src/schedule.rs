//! Variance-preserving noise schedules and the forward diffusion map.
//!
//! Timesteps are 1-based: `alpha_bar(t)` is ∏_{s=1..t} (1 − β_s). Index 0 is
//! accepted by [`NoiseSchedule::alpha_bar_or_clean`] and denotes the clean
//! latent (ᾱ = 1).

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    Linear,
    /// √β evenly spaced.
    ScaledLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Positive,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    terminal: Terminal,
}

pub fn make_schedule(
    timesteps: usize,
    beta_start: f64,
    beta_end: f64,
    kind: BetaKind,
) -> Result<NoiseSchedule> {
    if timesteps < 2 {
        return param_err(format!("need at least 2 timesteps, got {timesteps}"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return param_err(format!(
            "require 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        ));
    }
    let last = (timesteps - 1) as f64;
    let betas: Vec<f64> = (0..timesteps)
        .map(|i| {
            let s = i as f64 / last;
            match kind {
                BetaKind::Linear => beta_start + s * (beta_end - beta_start),
                BetaKind::ScaledLinear => {
                    let (a, b) = (beta_start.sqrt(), beta_end.sqrt());
                    let r = a + s * (b - a);
                    r * r
                }
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(timesteps);
    let mut acc = 1.0f64;
    for beta in &betas {
        acc *= 1.0 - beta;
        alpha_bars.push(acc);
    }
    Ok(NoiseSchedule {
        betas,
        alpha_bars,
        terminal: Terminal::Positive,
    })
}

impl NoiseSchedule {
    /// Default model schedule: scaled-linear(0.00085, 0.012) over 1000 steps, rescaled to zero terminal SNR.
    pub fn default_zero_terminal() -> Self {
        Self::default_positive()
            .rescale_zero_terminal_snr()
            .expect("default schedule is not flat")
    }

    pub fn default_positive() -> Self {
        make_schedule(1000, 0.00085, 0.012, BetaKind::ScaledLinear)
            .expect("default schedule parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.alpha_bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bars.is_empty()
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    fn check_index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.len() {
            return Err(Error::Index {
                index: t,
                len: self.len(),
            });
        }
        Ok(t - 1)
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bars[self.check_index(t)?])
    }

    /// Like [`alpha_bar`](Self::alpha_bar) but maps `t = 0` to the clean state ᾱ = 1.
    pub fn alpha_bar_or_clean(&self, t: usize) -> Result<f64> {
        if t == 0 {
            Ok(1.0)
        } else {
            self.alpha_bar(t)
        }
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        Ok(self.betas[self.check_index(t)?])
    }

    /// ᾱ_t / (1 − ᾱ_t), and 0 when ᾱ_t = 0.
    pub fn snr(&self, t: usize) -> Result<f64> {
        let a = self.alpha_bar(t)?;
        Ok(if a == 0.0 { 0.0 } else { a / (1.0 - a) })
    }

    /// Shifts and rescales √ᾱ so that √ᾱ_T = 0 while √ᾱ_1 is unchanged.
    pub fn rescale_zero_terminal_snr(&self) -> Result<NoiseSchedule> {
        let sqrt: Vec<f64> = self.alpha_bars.iter().map(|a| a.sqrt()).collect();
        let first = sqrt[0];
        let last = *sqrt.last().expect("schedule has at least 2 steps");
        if first - last <= 0.0 {
            return Err(Error::DegenerateSchedule(
                "alpha_bar_1 equals alpha_bar_T".into(),
            ));
        }
        let gain = first / (first - last);
        let mut alpha_bars: Vec<f64> = sqrt
            .iter()
            .map(|s| {
                let r = (s - last) * gain;
                r * r
            })
            .collect();
        alpha_bars[0] = self.alpha_bars[0];
        *alpha_bars.last_mut().unwrap() = 0.0;
        let mut betas = Vec::with_capacity(alpha_bars.len());
        let mut prev = 1.0;
        for &a in &alpha_bars {
            betas.push(1.0 - a / prev);
            prev = a;
        }
        Ok(NoiseSchedule {
            betas,
            alpha_bars,
            terminal: Terminal::Zero,
        })
    }
}

/// Maps an inference strength in (0, 1] to a timestep: round(strength·T), clamped to [1, T].
pub fn strength_to_index(strength: f64, timesteps: usize) -> Result<usize> {
    if !(strength > 0.0 && strength <= 1.0) {
        return param_err(format!("strength must lie in (0, 1], got {strength}"));
    }
    let t = (strength * timesteps as f64).round() as usize;
    Ok(t.clamp(1, timesteps))
}

/// √ᾱ·x0 + √(1−ᾱ)·ε. At ᾱ = 0 the result is ε itself, independent of x0.
pub fn forward_diffuse<T: Element>(
    x0: &Tensor<T>,
    eps: &Tensor<T>,
    alpha_bar: f64,
) -> Result<Tensor<T>> {
    x0.require_same_dims(eps)?;
    if !(0.0..=1.0).contains(&alpha_bar) {
        return param_err(format!("alpha_bar must lie in [0, 1], got {alpha_bar}"));
    }
    if alpha_bar == 0.0 {
        return Ok(eps.clone());
    }
    if alpha_bar == 1.0 {
        return Ok(x0.clone());
    }
    x0.affine(alpha_bar.sqrt(), eps, (1.0 - alpha_bar).sqrt())
}

/// Baseline schedule-consistent initializations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// x0 + γ·ε with γ ≥ 0.
    Additive,
    /// t·ε + (1 − t)·x0 with t ∈ [0, 1].
    Flow,
    /// Variance-preserving with σ ∈ [0, 1] mapped to ᾱ = (1 − σ)².
    Vp,
}

pub fn interpolate_init<T: Element>(
    x0: &Tensor<T>,
    eps: &Tensor<T>,
    strategy: InitStrategy,
    param: f64,
) -> Result<Tensor<T>> {
    x0.require_same_dims(eps)?;
    match strategy {
        InitStrategy::Additive => {
            if !(param >= 0.0 && param.is_finite()) {
                return param_err(format!("additive gamma must be >= 0, got {param}"));
            }
            x0.affine(1.0, eps, param)
        }
        InitStrategy::Flow | InitStrategy::Vp => {
            if !(0.0..=1.0).contains(&param) {
                return param_err(format!("interpolation weight must lie in [0, 1], got {param}"));
            }
            if strategy == InitStrategy::Flow {
                match param {
                    p if p == 0.0 => Ok(x0.clone()),
                    p if p == 1.0 => Ok(eps.clone()),
                    p => x0.affine(1.0 - p, eps, p),
                }
            } else {
                let root = 1.0 - param;
                forward_diffuse(x0, eps, root * root)
            }
        }
    }
}
