//! Closed-form verification sweeps and the similarity / moment / norm curves of
//! depth-k noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddim::{invert, oracle_denoiser, PredictionMode};
use crate::error::{param_err, Error, Result};
use crate::krnr::{krnr_closed_continuous, krnr_closed_discrete, krnr_coefficients, krnr_recursive, KrnrCoefficients};
use crate::schedule::NoiseSchedule;
use crate::tensor::{cosine, norm_deviation, stats, Dims, Rng, Tensor};

/// ‖a − b‖∞ / ‖b‖∞ (absolute when b is zero).
pub fn rel_error(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let diff = a.max_abs_diff(b);
    let scale = b.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub cases: usize,
    pub k_max: u32,
    pub dim: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            cases: 1000,
            k_max: 64,
            dim: 4096,
            alpha_min: 1e-4,
            alpha_max: 0.9999,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyCase {
    pub alpha_bar: f64,
    pub k: u32,
    /// Discrete closed form against the literal recursion.
    pub rel_closed: f64,
    /// Continuous closed form at integer k against the discrete one.
    pub rel_continuous: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub settings: VerifySettings,
    pub max_rel_closed: f64,
    pub max_rel_continuous: f64,
    pub worst_closed: VerifyCase,
    pub worst_continuous: VerifyCase,
}

/// Random (ᾱ, k) cases, each with its own Gaussian x0 and ε_inv of length `dim`, in `f64`.
pub fn verify_closed_forms(s: &VerifySettings) -> Result<VerifyReport> {
    if s.cases == 0 || s.k_max == 0 || s.dim == 0 {
        return param_err("cases, k_max and dim must be positive");
    }
    if !(s.alpha_min > 0.0 && s.alpha_min <= s.alpha_max && s.alpha_max < 1.0) {
        return param_err(format!("alpha range must lie in (0, 1), got [{}, {}]", s.alpha_min, s.alpha_max));
    }
    let dims = Dims::new(1, 1, 1, 1, s.dim)?;
    let draw = Rng::for_purpose(s.seed, "verify/cases");
    let cases: Vec<VerifyCase> = (0..s.cases)
        .into_par_iter()
        .map(|i| {
            let alpha_bar = s.alpha_min + (s.alpha_max - s.alpha_min) * draw.f64_at(2 * i as u64);
            let k = 1 + draw.index_at(2 * i as u64 + 1, s.k_max as usize) as u32;
            let mut rng = Rng::for_purpose(s.seed, &format!("verify/tensors/{i}"));
            let x0 = Tensor::<f64>::gaussian(dims, &mut rng);
            let eps = Tensor::<f64>::gaussian(dims, &mut rng);
            let rec = krnr_recursive(&x0, &eps, alpha_bar, k)?;
            let disc = krnr_closed_discrete(&x0, &eps, alpha_bar, k)?;
            let cont = krnr_closed_continuous(&x0, &eps, alpha_bar, k as f64)?;
            Ok(VerifyCase {
                alpha_bar,
                k,
                rel_closed: rel_error(&disc, &rec),
                rel_continuous: rel_error(&cont, &disc),
            })
        })
        .collect::<Result<_>>()?;
    let worst = |f: fn(&VerifyCase) -> f64| *cases.iter().max_by(|a, b| f(a).total_cmp(&f(b))).expect("non-empty");
    let worst_closed = worst(|c| c.rel_closed);
    let worst_continuous = worst(|c| c.rel_continuous);
    Ok(VerifyReport {
        settings: *s,
        max_rel_closed: worst_closed.rel_closed,
        max_rel_continuous: worst_continuous.rel_continuous,
        worst_closed,
        worst_continuous,
    })
}

/// Where ε_inv comes from in the analysis sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    /// Fresh N(0, I) times `scale`.
    Gaussian { scale: f64 },
    /// Oracle DDIM inversion of x0 to the analysis timestep on the positive schedule.
    Inverted { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub dims: Dims,
    pub seed: u64,
    pub t: usize,
    pub source: NoiseSource,
    /// Remove the x0 component from ε_inv first.
    pub orthogonalize: bool,
    /// Evaluate ᾱ on the zero-terminal schedule (positive schedule otherwise).
    pub zero_terminal: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            dims: Dims::new(1, 4, 16, 60, 90).expect("valid dims"),
            seed: 0,
            t: 950,
            source: NoiseSource::Gaussian { scale: 1.0 },
            orthogonalize: true,
            zero_terminal: true,
        }
    }
}

/// The pair every sweep row is built from.
#[derive(Debug, Clone)]
pub struct AnalysisInputs {
    pub x0: Tensor<f64>,
    pub eps_inv: Tensor<f64>,
    pub alpha_bar: f64,
}

/// ε − (⟨ε, x⟩/⟨x, x⟩)·x.
pub fn orthogonalize(eps: &Tensor<f64>, x: &Tensor<f64>) -> Result<Tensor<f64>> {
    eps.require_same_dims(x)?;
    let xx: f64 = x.as_slice().iter().map(|v| v * v).sum();
    if xx == 0.0 {
        return Err(Error::DegenerateInput("cannot orthogonalize against a zero tensor".into()));
    }
    let ex: f64 = eps.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
    eps.affine(1.0, x, -ex / xx)
}

pub fn analysis_inputs(s: &AnalysisSettings) -> Result<AnalysisInputs> {
    let positive = NoiseSchedule::default_positive();
    let schedule = if s.zero_terminal {
        positive.rescale_zero_terminal_snr()?
    } else {
        positive.clone()
    };
    let alpha_bar = schedule.alpha_bar(s.t)?;
    let x0 = Tensor::<f64>::gaussian(s.dims, &mut Rng::for_purpose(s.seed, "analysis/x0"));
    let fresh = Tensor::<f64>::gaussian(s.dims, &mut Rng::for_purpose(s.seed, "analysis/eps"));
    let mut eps_inv = match s.source {
        NoiseSource::Gaussian { scale } => fresh.scale(scale),
        NoiseSource::Inverted { steps } => {
            let oracle = oracle_denoiser(x0.clone(), fresh, PredictionMode::Eps)?;
            invert(&x0, &positive, steps, &oracle, s.t)?
        }
    };
    if s.orthogonalize {
        eps_inv = orthogonalize(&eps_inv, &x0)?;
    }
    Ok(AnalysisInputs { x0, eps_inv, alpha_bar })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub k: f64,
    pub cosine: f64,
    pub mean: f64,
    pub variance: f64,
    pub norm_deviation: f64,
}

pub const ANALYSIS_HEADER: [&str; 5] = ["k", "cosine", "mean", "variance", "norm_deviation"];

impl AnalysisRow {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.k, self.cosine, self.mean, self.variance, self.norm_deviation]
    }
}

/// Measured statistics of ε⁽ᵏ⁾ for each k; global mean and variance.
pub fn analysis_rows(inputs: &AnalysisInputs, ks: &[f64]) -> Result<Vec<AnalysisRow>> {
    ks.par_iter()
        .map(|&k| {
            let e = krnr_closed_continuous(&inputs.x0, &inputs.eps_inv, inputs.alpha_bar, k)?;
            let st = stats(&e);
            Ok(AnalysisRow {
                k,
                cosine: cosine(&e, &inputs.x0)?,
                mean: st.mean,
                variance: st.variance,
                norm_deviation: norm_deviation(&e),
            })
        })
        .collect()
}

/// Sufficient statistics of the (x0, ε_inv) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMoments {
    pub n: f64,
    pub mean_x: f64,
    pub mean_e: f64,
    pub var_x: f64,
    pub var_e: f64,
    pub cov: f64,
    pub xx: f64,
    pub ee: f64,
    pub xe: f64,
}

pub fn pair_moments(x: &Tensor<f64>, e: &Tensor<f64>) -> PairMoments {
    let n = x.len() as f64;
    let (xs, es) = (x.as_slice(), e.as_slice());
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_e = es.iter().sum::<f64>() / n;
    let (mut var_x, mut var_e, mut cov, mut xx, mut ee, mut xe) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(es) {
        var_x += (a - mean_x) * (a - mean_x);
        var_e += (b - mean_e) * (b - mean_e);
        cov += (a - mean_x) * (b - mean_e);
        xx += a * a;
        ee += b * b;
        xe += a * b;
    }
    PairMoments {
        n,
        mean_x,
        mean_e,
        var_x: var_x / n,
        var_e: var_e / n,
        cov: cov / n,
        xx,
        ee,
        xe,
    }
}

/// Row predicted from the coefficients alone: the affine composition law for
/// mean and variance, and the Gram expansion for norm and cosine.
pub fn predicted_row(m: &PairMoments, c: &KrnrCoefficients, k: f64) -> AnalysisRow {
    let (a, b) = (c.c_x0, c.c_eps);
    let norm_sq = a * a * m.xx + 2.0 * a * b * m.xe + b * b * m.ee;
    let norm = norm_sq.max(0.0).sqrt();
    AnalysisRow {
        k,
        cosine: (a * m.xx + b * m.xe) / (norm * m.xx.sqrt()),
        mean: a * m.mean_x + b * m.mean_e,
        variance: a * a * m.var_x + 2.0 * a * b * m.cov + b * b * m.var_e,
        norm_deviation: (norm - m.n.sqrt()).abs(),
    }
}

/// c_x0‖x0‖ / √(c_x0²‖x0‖² + c_eps²‖ε‖²), the cosine when x0 ⊥ ε.
pub fn orthogonal_cosine(c: &KrnrCoefficients, norm_x: f64, norm_e: f64) -> f64 {
    let a = c.c_x0 * norm_x;
    let b = c.c_eps * norm_e;
    a / (a * a + b * b).sqrt()
}

pub fn predicted_rows(inputs: &AnalysisInputs, ks: &[f64]) -> Result<Vec<AnalysisRow>> {
    let m = pair_moments(&inputs.x0, &inputs.eps_inv);
    ks.iter()
        .map(|&k| Ok(predicted_row(&m, &krnr_coefficients(inputs.alpha_bar, k)?, k)))
        .collect()
}

/// Grid point with the smallest norm deviation; ties keep the first.
pub fn norm_minimizer(rows: &[AnalysisRow]) -> Option<AnalysisRow> {
    rows.iter().copied().reduce(|best, r| if r.norm_deviation < best.norm_deviation { r } else { best })
}
