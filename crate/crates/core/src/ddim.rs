//! Deterministic (η = 0) DDIM sampling and inversion against a pluggable denoiser.
//!
//! Plans start or end at index 0, the clean state with ᾱ = 1. This is the
//! textbook DDIM update; the modified sampler some video models ship is not
//! reproduced here.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::{Element, Tensor};

/// What a denoiser's raw output represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Eps,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Eps,
    X0,
    V,
}

pub trait Denoiser<T: Element>: Send + Sync {
    fn mode(&self) -> PredictionMode;

    /// Prediction for `x_t` at timestep `t` (0 = clean) with cumulative signal `alpha_bar`.
    fn predict(&self, x_t: &Tensor<T>, t: usize, alpha_bar: f64) -> Result<Tensor<T>>;
}

/// Converts between ε-, x0- and v-parameterizations using
/// ε = √ᾱ·v + √(1−ᾱ)·x_t and x0 = √ᾱ·x_t − √(1−ᾱ)·v.
pub fn convert_prediction<T: Element>(
    x_t: &Tensor<T>,
    pred: &Tensor<T>,
    alpha_bar: f64,
    from: PredictionMode,
    to: Parameterization,
) -> Result<Tensor<T>> {
    x_t.require_same_dims(pred)?;
    if !(0.0..=1.0).contains(&alpha_bar) {
        return param_err(format!("alpha_bar must lie in [0, 1], got {alpha_bar}"));
    }
    let sa = alpha_bar.sqrt();
    let sn = (1.0 - alpha_bar).sqrt();
    if alpha_bar == 0.0 && to == Parameterization::X0 {
        return Err(Error::DivisionByZero(
            "x0 is unrecoverable at alpha_bar = 0".into(),
        ));
    }
    match (from, to) {
        (PredictionMode::Eps, Parameterization::Eps) | (PredictionMode::V, Parameterization::V) => {
            Ok(pred.clone())
        }
        (PredictionMode::V, Parameterization::Eps) => pred.zip_map(x_t, |v, x| sa * v + sn * x),
        (PredictionMode::V, Parameterization::X0) => x_t.zip_map(pred, |x, v| sa * x - sn * v),
        (PredictionMode::Eps, Parameterization::X0) => x_t.zip_map(pred, |x, e| (x - sn * e) / sa),
        (PredictionMode::Eps, Parameterization::V) => {
            if alpha_bar == 0.0 {
                return Err(Error::DivisionByZero(
                    "v is undetermined by eps at alpha_bar = 0".into(),
                ));
            }
            pred.zip_map(x_t, |e, x| (e - sn * x) / sa)
        }
    }
}

fn predict_eps<T: Element>(
    denoiser: &dyn Denoiser<T>,
    x_t: &Tensor<T>,
    t: usize,
    alpha_bar: f64,
) -> Result<Tensor<T>> {
    let raw = denoiser.predict(x_t, t, alpha_bar)?;
    if raw.dims() != x_t.dims() {
        return Err(Error::Dimension(format!(
            "denoiser returned {} for input {}",
            raw.dims(),
            x_t.dims()
        )));
    }
    convert_prediction(x_t, &raw, alpha_bar, denoiser.mode(), Parameterization::Eps)
}

/// The η = 0 update from ᾱ_from to ᾱ_to with a fixed noise estimate.
pub fn ddim_update<T: Element>(
    x_t: &Tensor<T>,
    eps_hat: &Tensor<T>,
    alpha_from: f64,
    alpha_to: f64,
) -> Result<Tensor<T>> {
    if alpha_from <= 0.0 {
        return Err(Error::Collapse(
            "cannot estimate x0 from a state with alpha_bar = 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&alpha_to) || alpha_from > 1.0 {
        return param_err(format!("alpha_bar out of range: {alpha_from} -> {alpha_to}"));
    }
    let (sf, nf) = (alpha_from.sqrt(), (1.0 - alpha_from).sqrt());
    let (st, nt) = (alpha_to.sqrt(), (1.0 - alpha_to).sqrt());
    x_t.zip_map(eps_hat, |x, e| {
        let x0 = (x - nf * e) / sf;
        st * x0 + nt * e
    })
}

/// One sampling step from `t_from` down to `t_to` (t_to ≤ t_from).
pub fn ddim_step<T: Element>(
    x_t: &Tensor<T>,
    denoiser: &dyn Denoiser<T>,
    t_from: usize,
    t_to: usize,
    schedule: &NoiseSchedule,
) -> Result<Tensor<T>> {
    if t_to > t_from {
        return param_err(format!("sampling step must not increase t ({t_from} -> {t_to})"));
    }
    let a_from = schedule.alpha_bar_or_clean(t_from)?;
    let a_to = schedule.alpha_bar_or_clean(t_to)?;
    if a_from == 0.0 {
        return Err(Error::Collapse(format!(
            "sampling step starts at t = {t_from} where alpha_bar = 0"
        )));
    }
    let eps = predict_eps(denoiser, x_t, t_from, a_from)?;
    ddim_update(x_t, &eps, a_from, a_to)
}

/// One inversion step from `t_from` up to `t_to` (t_to ≥ t_from); both ends need ᾱ > 0.
pub fn ddim_invert_step<T: Element>(
    x_t: &Tensor<T>,
    denoiser: &dyn Denoiser<T>,
    t_from: usize,
    t_to: usize,
    schedule: &NoiseSchedule,
) -> Result<Tensor<T>> {
    if t_to < t_from {
        return param_err(format!("inversion step must not decrease t ({t_from} -> {t_to})"));
    }
    let a_from = schedule.alpha_bar_or_clean(t_from)?;
    let a_to = schedule.alpha_bar_or_clean(t_to)?;
    if a_from == 0.0 || a_to == 0.0 {
        return Err(Error::Collapse(format!(
            "inversion step {t_from} -> {t_to} reaches alpha_bar = 0; x0 cannot be recovered"
        )));
    }
    let eps = predict_eps(denoiser, x_t, t_from, a_from)?;
    ddim_update(x_t, &eps, a_from, a_to)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanDirection {
    Inversion,
    Sampling,
}

/// Timestep indices visited by a trajectory, excluding the clean endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub direction: PlanDirection,
    pub indices: Vec<usize>,
    pub alpha_bars: Vec<f64>,
}

/// `steps` evenly spaced indices over [1, t_end], rounded and deduplicated, ascending.
fn spaced_indices(steps: usize, t_end: usize) -> Vec<usize> {
    match steps {
        0 => Vec::new(),
        1 => vec![t_end],
        n => {
            let mut out: Vec<usize> = (0..n)
                .map(|i| (1.0 + i as f64 * (t_end - 1) as f64 / (n - 1) as f64).round() as usize)
                .collect();
            out.dedup();
            out
        }
    }
}

impl StepPlan {
    pub fn inversion(schedule: &NoiseSchedule, steps: usize, t_stop: usize) -> Result<Self> {
        schedule.alpha_bar(t_stop)?;
        let indices = spaced_indices(steps, t_stop);
        let alpha_bars = indices
            .iter()
            .map(|&t| schedule.alpha_bar(t))
            .collect::<Result<Vec<_>>>()?;
        if let Some(pos) = alpha_bars.iter().position(|&a| a <= 0.0) {
            return Err(Error::Collapse(format!(
                "inversion plan reaches t = {} where alpha_bar = 0",
                indices[pos]
            )));
        }
        Ok(Self {
            direction: PlanDirection::Inversion,
            indices,
            alpha_bars,
        })
    }

    pub fn sampling(schedule: &NoiseSchedule, steps: usize, t_start: usize) -> Result<Self> {
        schedule.alpha_bar(t_start)?;
        let mut indices = spaced_indices(steps, t_start);
        indices.reverse();
        let alpha_bars = indices
            .iter()
            .map(|&t| schedule.alpha_bar(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            direction: PlanDirection::Sampling,
            indices,
            alpha_bars,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// DDIM inversion of a clean latent up to `t_stop`; returns ε_inv.
pub fn invert<T: Element>(
    x0: &Tensor<T>,
    schedule: &NoiseSchedule,
    steps: usize,
    denoiser: &dyn Denoiser<T>,
    t_stop: usize,
) -> Result<Tensor<T>> {
    let plan = StepPlan::inversion(schedule, steps, t_stop)?;
    let mut x = x0.clone();
    let mut t = 0;
    for &next in &plan.indices {
        x = ddim_invert_step(&x, denoiser, t, next, schedule)?;
        t = next;
    }
    Ok(x)
}

/// DDIM sampling from `x_init` at `t_start`; the last state is mapped to its x0 estimate.
pub fn sample<T: Element>(
    x_init: &Tensor<T>,
    schedule: &NoiseSchedule,
    steps: usize,
    denoiser: &dyn Denoiser<T>,
    t_start: usize,
) -> Result<Tensor<T>> {
    let plan = StepPlan::sampling(schedule, steps, t_start)?;
    let mut x = x_init.clone();
    for pair in plan.indices.windows(2) {
        x = ddim_step(&x, denoiser, pair[0], pair[1], schedule)?;
    }
    match plan.indices.last() {
        None => Ok(x),
        Some(&t) => ddim_step(&x, denoiser, t, 0, schedule),
    }
}

/// Knows the true (x0, ε) pair and answers with the prediction consistent with
/// x_t = √ᾱ·x0 + √(1−ᾱ)·ε̂ at every timestep.
#[derive(Debug, Clone)]
pub struct OracleDenoiser<T: Element> {
    x0: Tensor<T>,
    eps: Tensor<T>,
    mode: PredictionMode,
}

pub fn oracle_denoiser<T: Element>(
    x0_true: Tensor<T>,
    eps_true: Tensor<T>,
    mode: PredictionMode,
) -> Result<OracleDenoiser<T>> {
    x0_true.require_same_dims(&eps_true)?;
    Ok(OracleDenoiser {
        x0: x0_true,
        eps: eps_true,
        mode,
    })
}

impl<T: Element> OracleDenoiser<T> {
    pub fn pivot(&self) -> &Tensor<T> {
        &self.x0
    }
}

impl<T: Element> Denoiser<T> for OracleDenoiser<T> {
    fn mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict(&self, x_t: &Tensor<T>, _t: usize, alpha_bar: f64) -> Result<Tensor<T>> {
        x_t.require_same_dims(&self.x0)?;
        let sa = alpha_bar.sqrt();
        let sn = (1.0 - alpha_bar).sqrt();
        // At the clean state x_t carries no noise; fall back to the true ε.
        let eps = if sn == 0.0 {
            self.eps.clone()
        } else {
            x_t.zip_map(&self.x0, |x, x0| (x - sa * x0) / sn)?
        };
        match self.mode {
            PredictionMode::Eps => Ok(eps),
            PredictionMode::V => eps.zip_map(&self.x0, |e, x0| sa * e - sn * x0),
        }
    }
}

/// Always predicts ε̂ = 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl<T: Element> Denoiser<T> for ZeroDenoiser {
    fn mode(&self) -> PredictionMode {
        PredictionMode::Eps
    }

    fn predict(&self, x_t: &Tensor<T>, _t: usize, _alpha_bar: f64) -> Result<Tensor<T>> {
        Ok(Tensor::zeros(x_t.dims()))
    }
}

/// Returns the same prediction regardless of input.
#[derive(Debug, Clone)]
pub struct FixedDenoiser<T: Element> {
    pub prediction: Tensor<T>,
    pub mode: PredictionMode,
}

impl<T: Element> Denoiser<T> for FixedDenoiser<T> {
    fn mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict(&self, x_t: &Tensor<T>, _t: usize, _alpha_bar: f64) -> Result<Tensor<T>> {
        x_t.require_same_dims(&self.prediction)?;
        Ok(self.prediction.clone())
    }
}

/// Posterior-mean denoiser for an i.i.d. Gaussian data prior N(mean, variance).
///
/// E[x0 | x_t] = mean + √ᾱ·variance·(x_t − √ᾱ·mean) / (ᾱ·variance + 1 − ᾱ); the
/// matching ε̂ is (x_t − √ᾱ·mean)·√(1−ᾱ) / (ᾱ·variance + 1 − ᾱ).
#[derive(Debug, Clone, Copy)]
pub struct LinearDenoiser {
    pub mean: f64,
    pub variance: f64,
    pub mode: PredictionMode,
}

impl Default for LinearDenoiser {
    fn default() -> Self {
        Self {
            mean: 0.0,
            variance: 1.0,
            mode: PredictionMode::Eps,
        }
    }
}

impl<T: Element> Denoiser<T> for LinearDenoiser {
    fn mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict(&self, x_t: &Tensor<T>, _t: usize, alpha_bar: f64) -> Result<Tensor<T>> {
        let sa = alpha_bar.sqrt();
        let sn = (1.0 - alpha_bar).sqrt();
        let denom = alpha_bar * self.variance + 1.0 - alpha_bar;
        if denom <= 0.0 {
            return Err(Error::DivisionByZero("linear denoiser with zero prior variance at the clean state".into()));
        }
        let (m, var) = (self.mean, self.variance);
        Ok(x_t.map(|x| {
            let centered = x - sa * m;
            let eps = centered * sn / denom;
            match self.mode {
                PredictionMode::Eps => eps,
                PredictionMode::V => {
                    let x0 = m + sa * var * centered / denom;
                    sa * eps - sn * x0
                }
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{forward_diffuse, make_schedule, strength_to_index, BetaKind};
    use crate::tensor::{Dims, Rng};

    fn pair(seed: u64) -> (Tensor<f64>, Tensor<f64>) {
        let d = Dims::new(1, 2, 4, 4, 4).unwrap();
        let mut rng = Rng::new(seed, 0);
        (Tensor::gaussian(d, &mut rng), Tensor::gaussian(d, &mut rng))
    }

    #[test]
    fn v_eps_round_trip() {
        let (x, v) = pair(1);
        for a in [0.1, 0.5, 0.99] {
            let eps = convert_prediction(&x, &v, a, PredictionMode::V, Parameterization::Eps).unwrap();
            let back = convert_prediction(&x, &eps, a, PredictionMode::Eps, Parameterization::V).unwrap();
            assert!(back.max_abs_diff(&v) < 1e-12);
        }
    }

    #[test]
    fn v_of_true_pair_converts_to_true_eps() {
        let (x0, eps) = pair(2);
        let a: f64 = 0.3;
        let xt = forward_diffuse(&x0, &eps, a).unwrap();
        let v = eps.affine(a.sqrt(), &x0, -(1.0 - a).sqrt()).unwrap();
        let got = convert_prediction(&xt, &v, a, PredictionMode::V, Parameterization::Eps).unwrap();
        assert!(got.max_abs_diff(&eps) < 1e-12);
        let got_x0 = convert_prediction(&xt, &v, a, PredictionMode::V, Parameterization::X0).unwrap();
        assert!(got_x0.max_abs_diff(&x0) < 1e-12);
    }

    #[test]
    fn clean_state_v_to_x0_is_identity() {
        let (x, v) = pair(3);
        let x0 = convert_prediction(&x, &v, 1.0, PredictionMode::V, Parameterization::X0).unwrap();
        assert_eq!(x0, x);
    }

    #[test]
    fn zero_alpha_to_x0_fails() {
        let (x, v) = pair(4);
        let err = convert_prediction(&x, &v, 0.0, PredictionMode::Eps, Parameterization::X0).unwrap_err();
        assert_eq!(err.category(), "division_by_zero");
    }

    #[test]
    fn zero_denoiser_scales() {
        let s = NoiseSchedule::default_positive();
        let (x, _) = pair(5);
        let out = ddim_step(&x, &ZeroDenoiser, 500, 200, &s).unwrap();
        let factor = (s.alpha_bar(200).unwrap() / s.alpha_bar(500).unwrap()).sqrt();
        assert!(out.max_abs_diff(&x.scale(factor)) < 1e-12);
        let same = ddim_step(&x, &ZeroDenoiser, 500, 500, &s).unwrap();
        assert!(same.max_abs_diff(&x) < 1e-12);
        // Inversion shrinks by the reciprocal factor.
        let up = ddim_invert_step(&x, &ZeroDenoiser, 200, 500, &s).unwrap();
        assert!(up.max_abs_diff(&x.scale(1.0 / factor)) < 1e-12);
    }

    #[test]
    fn oracle_step_to_clean_recovers_x0() {
        let s = NoiseSchedule::default_positive();
        let (x0, eps) = pair(6);
        let xt = forward_diffuse(&x0, &eps, s.alpha_bar(700).unwrap()).unwrap();
        let oracle = oracle_denoiser(x0.clone(), eps, PredictionMode::V).unwrap();
        let out = ddim_step(&xt, &oracle, 700, 0, &s).unwrap();
        assert!(out.max_abs_diff(&x0) < 1e-6);
    }

    #[test]
    fn oracle_predictions_are_consistent() {
        let s = NoiseSchedule::default_positive();
        let (x0, eps) = pair(7);
        let oracle = oracle_denoiser(x0.clone(), eps.clone(), PredictionMode::Eps).unwrap();
        let voracle = oracle_denoiser(x0.clone(), eps.clone(), PredictionMode::V).unwrap();
        for t in [1, 100, 500, 999] {
            let a = s.alpha_bar(t).unwrap();
            let xt = forward_diffuse(&x0, &eps, a).unwrap();
            let e_hat = oracle.predict(&xt, t, a).unwrap();
            let resid = xt.zip_map(&x0, |x, x0| x - a.sqrt() * x0).unwrap()
                .affine(1.0, &e_hat, -(1.0 - a).sqrt()).unwrap();
            assert!(resid.as_slice().iter().all(|r| r.abs() < 1e-6));
            let v = voracle.predict(&xt, t, a).unwrap();
            let e_from_v = convert_prediction(&xt, &v, a, PredictionMode::V, Parameterization::Eps).unwrap();
            assert!(e_from_v.max_abs_diff(&eps) < 1e-6);
        }
    }

    #[test]
    fn fixed_prediction_inversion_is_exact_inverse() {
        let s = NoiseSchedule::default_positive();
        let (x, e) = pair(8);
        let fixed = FixedDenoiser { prediction: e, mode: PredictionMode::Eps };
        let up = ddim_invert_step(&x, &fixed, 300, 600, &s).unwrap();
        let back = ddim_step(&up, &fixed, 600, 300, &s).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn collapse_on_zero_terminal() {
        let z = NoiseSchedule::default_zero_terminal();
        let (x, _) = pair(9);
        let err = ddim_invert_step(&x, &ZeroDenoiser, 500, 1000, &z).unwrap_err();
        assert_eq!(err.category(), "collapse");
        assert_eq!(StepPlan::inversion(&z, 30, 1000).unwrap_err().category(), "collapse");
        assert_eq!(ddim_step(&x, &ZeroDenoiser, 1000, 900, &z).unwrap_err().category(), "collapse");
    }

    #[test]
    fn plans() {
        let s = NoiseSchedule::default_positive();
        let t = strength_to_index(0.95, 1000).unwrap();
        let p = StepPlan::inversion(&s, 30, t).unwrap();
        assert_eq!(p.len(), 30);
        assert_eq!(p.indices[0], 1);
        assert_eq!(*p.indices.last().unwrap(), 950);
        assert!(p.indices.windows(2).all(|w| w[0] < w[1]));
        let q = StepPlan::sampling(&s, 50, t).unwrap();
        assert_eq!(q.len(), 50);
        assert!(q.indices.windows(2).all(|w| w[0] > w[1]));
        // Dedup when steps exceed the available indices.
        let tiny = make_schedule(5, 0.1, 0.2, BetaKind::Linear).unwrap();
        assert_eq!(StepPlan::inversion(&tiny, 20, 5).unwrap().indices, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_step_inversion_matches_step() {
        let s = NoiseSchedule::default_positive();
        let (x0, eps) = pair(10);
        let oracle = oracle_denoiser(x0.clone(), eps, PredictionMode::Eps).unwrap();
        let a = invert(&x0, &s, 1, &oracle, 400).unwrap();
        let b = ddim_invert_step(&x0, &oracle, 0, 400, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_round_trip_and_zero_steps() {
        let s = NoiseSchedule::default_positive();
        let (x0, eps) = pair(11);
        let oracle = oracle_denoiser(x0.clone(), eps, PredictionMode::V).unwrap();
        let inv = invert(&x0, &s, 30, &oracle, 950).unwrap();
        let rec = sample(&inv, &s, 30, &oracle, 950).unwrap();
        assert!(rec.max_abs_diff(&x0) < 1e-6);
        assert_eq!(sample(&inv, &s, 0, &oracle, 950).unwrap(), inv);
    }

    #[test]
    fn distinct_pivots_invert_differently() {
        let s = NoiseSchedule::default_positive();
        let (a, eps) = pair(12);
        let b = a.map(|v| v + 1.0);
        let oa = oracle_denoiser(a.clone(), eps.clone(), PredictionMode::Eps).unwrap();
        let ob = oracle_denoiser(b.clone(), eps, PredictionMode::Eps).unwrap();
        let ia = invert(&a, &s, 10, &oa, 900).unwrap();
        let ib = invert(&b, &s, 10, &ob, 900).unwrap();
        assert!(ia.max_abs_diff(&ib) > 1e-3);
    }

    #[test]
    fn linear_denoiser_modes_agree() {
        let s = NoiseSchedule::default_positive();
        let (x, _) = pair(13);
        let e = LinearDenoiser { mean: 0.2, variance: 0.5, mode: PredictionMode::Eps };
        let v = LinearDenoiser { mode: PredictionMode::V, ..e };
        let a = sample(&x, &s, 20, &e, 800).unwrap();
        let b = sample(&x, &s, 20, &v, 800).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
    }
}
