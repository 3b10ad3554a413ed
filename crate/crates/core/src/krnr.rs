//! K-order recursive noise representation.
//!
//! With r = √(1−ᾱ), the recursion ε⁽ᵏ⁾ = √ᾱ·x0 + r·ε⁽ᵏ⁻¹⁾ seeded by
//! ε⁽¹⁾ = √ᾱ·x0 + r·ε_inv unrolls to
//!
//! ```text
//! ε⁽ᵏ⁾ = √ᾱ·(1 − rᵏ)/(1 − r) · x0 + rᵏ · ε_inv
//! ```
//!
//! The closed forms are the production path; [`krnr_recursive`] is kept as
//! the reference the closed forms are verified against.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::{adain, Element, Tensor};

/// Weights of ε⁽ᵏ⁾ on the pivot latent and the inverted noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrnrCoefficients {
    pub c_x0: f64,
    pub c_eps: f64,
    /// k → ∞ asymptote of `c_x0`, √ᾱ / (1 − r).
    pub limit_x0: f64,
}

/// Recursion depth, adaptive reference index and evaluation timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrnrParams {
    pub k: f64,
    pub delta: u32,
    pub t: usize,
}

impl Default for KrnrParams {
    fn default() -> Self {
        Self {
            k: 10.0,
            delta: 3,
            t: 950,
        }
    }
}

impl KrnrParams {
    /// Checks the parameters and returns ᾱ at `t`.
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<f64> {
        check_depth(self.k, self.delta)?;
        let a = schedule.alpha_bar(self.t)?;
        check_open_alpha(a)?;
        Ok(a)
    }
}

fn check_open_alpha(alpha_bar: f64) -> Result<()> {
    if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
        return param_err(format!(
            "alpha_bar must lie in (0, 1) for K-RNR, got {alpha_bar}"
        ));
    }
    Ok(())
}

fn check_depth(k: f64, delta: u32) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return param_err(format!("recursion depth k must be > 0, got {k}"));
    }
    if delta < 1 || delta as f64 > k.ceil() {
        return param_err(format!("delta must lie in 1..=ceil(k) = {}, got {delta}", k.ceil()));
    }
    Ok(())
}

/// Closed-form coefficients for real k ≥ 0.
///
/// 1 − r and 1 − rᵏ are evaluated as ᾱ/(1 + r) and −expm1(k·ln r) with
/// ln r = ½·ln_1p(−ᾱ), so neither difference cancels when ᾱ is tiny.
pub fn krnr_coefficients(alpha_bar: f64, k: f64) -> Result<KrnrCoefficients> {
    check_open_alpha(alpha_bar)?;
    if !(k >= 0.0 && k.is_finite()) {
        return param_err(format!("k must be finite and >= 0, got {k}"));
    }
    let sqrt_a = alpha_bar.sqrt();
    let r = (1.0 - alpha_bar).sqrt();
    let one_minus_r = alpha_bar / (1.0 + r);
    let ln_r = 0.5 * (-alpha_bar).ln_1p();
    let one_minus_rk = -(k * ln_r).exp_m1();
    Ok(KrnrCoefficients {
        c_x0: sqrt_a * one_minus_rk / one_minus_r,
        c_eps: (k * ln_r).exp(),
        limit_x0: sqrt_a / one_minus_r,
    })
}

/// Coefficients by explicit summation of the finite geometric series.
pub fn krnr_coefficients_discrete(alpha_bar: f64, k: u32) -> Result<KrnrCoefficients> {
    check_open_alpha(alpha_bar)?;
    let sqrt_a = alpha_bar.sqrt();
    let r = (1.0 - alpha_bar).sqrt();
    let mut sum = 0.0;
    let mut power = 1.0;
    for _ in 0..k {
        sum += sqrt_a * power;
        power *= r;
    }
    Ok(KrnrCoefficients {
        c_x0: sum,
        c_eps: power,
        limit_x0: sqrt_a / (alpha_bar / (1.0 + r)),
    })
}

/// Literal k-fold recursion; each element is carried in `f64` across all steps.
pub fn krnr_recursive<T: Element>(
    x0: &Tensor<T>,
    eps_inv: &Tensor<T>,
    alpha_bar: f64,
    k: u32,
) -> Result<Tensor<T>> {
    check_open_alpha(alpha_bar)?;
    if k < 1 {
        return param_err("recursion depth must be >= 1");
    }
    let sqrt_a = alpha_bar.sqrt();
    let r = (1.0 - alpha_bar).sqrt();
    x0.zip_map(eps_inv, |x, e| {
        let mut cur = e;
        for _ in 0..k {
            cur = sqrt_a * x + r * cur;
        }
        cur
    })
}

pub fn krnr_closed_discrete<T: Element>(
    x0: &Tensor<T>,
    eps_inv: &Tensor<T>,
    alpha_bar: f64,
    k: u32,
) -> Result<Tensor<T>> {
    if k < 1 {
        return param_err("recursion depth must be >= 1");
    }
    let c = krnr_coefficients_discrete(alpha_bar, k)?;
    x0.affine(c.c_x0, eps_inv, c.c_eps)
}

pub fn krnr_closed_continuous<T: Element>(
    x0: &Tensor<T>,
    eps_inv: &Tensor<T>,
    alpha_bar: f64,
    k: f64,
) -> Result<Tensor<T>> {
    let c = krnr_coefficients(alpha_bar, k)?;
    x0.require_same_dims(eps_inv)?;
    if k == 0.0 {
        return Ok(eps_inv.clone());
    }
    x0.affine(c.c_x0, eps_inv, c.c_eps)
}

/// AdaIN[ε⁽ᵏ⁾, ε⁽ᵟ⁾]: the structure of depth k with the per-channel scale of depth δ.
pub fn adaptive_krnr<T: Element>(
    x0: &Tensor<T>,
    eps_inv: &Tensor<T>,
    alpha_bar: f64,
    k: f64,
    delta: u32,
) -> Result<Tensor<T>> {
    check_depth(k, delta)?;
    let deep = krnr_closed_continuous(x0, eps_inv, alpha_bar, k)?;
    let reference = krnr_closed_continuous(x0, eps_inv, alpha_bar, delta as f64)?;
    adain(&deep, &reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{stats, Dims, Rng};

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec(Dims::new(1, 1, 1, 1, 1).unwrap(), vec![v]).unwrap()
    }

    // Hand evaluation at ᾱ = 0.75: √ᾱ = 0.8660254037844386, r = 0.5.
    const SQRT_075: f64 = 0.866_025_403_784_438_6;

    #[test]
    fn hand_unrolled_three_steps() {
        // ε1 = √.75 + .5, ε2 = √.75 + .5ε1, ε3 = √.75 + .5ε2 = 1.75√.75 + .125
        let out = krnr_recursive(&scalar(1.0), &scalar(1.0), 0.75, 3).unwrap();
        let expected = 1.75 * SQRT_075 + 0.125;
        assert!((out.as_slice()[0] - expected).abs() < 1e-15);
        assert!((out.as_slice()[0] - 1.640_544_4).abs() < 1e-7);
    }

    #[test]
    fn coefficients_at_three() {
        let c = krnr_coefficients(0.75, 3.0).unwrap();
        assert!((c.c_x0 - 1.515_544_4).abs() < 1e-7);
        assert!((c.c_eps - 0.125).abs() < 1e-15);
        assert!((c.limit_x0 - 1.732_050_8).abs() < 1e-7);
        let d = krnr_coefficients_discrete(0.75, 3).unwrap();
        assert!((d.c_x0 - 1.75 * SQRT_075).abs() < 1e-15);
        assert_eq!(d.c_eps, 0.125);
    }

    #[test]
    fn depth_zero_and_one() {
        let c0 = krnr_coefficients(0.3, 0.0).unwrap();
        assert_eq!((c0.c_x0, c0.c_eps), (0.0, 1.0));
        let c1 = krnr_coefficients_discrete(0.3, 1).unwrap();
        assert_eq!(c1.c_x0, 0.3f64.sqrt());
        assert_eq!(c1.c_eps, 0.7f64.sqrt());
        let e = scalar(-0.0);
        assert_eq!(
            krnr_closed_continuous(&scalar(5.0), &e, 0.3, 0.0).unwrap().as_slice()[0].to_bits(),
            (-0.0f64).to_bits()
        );
    }

    #[test]
    fn base_case_is_forward_diffuse() {
        let mut rng = Rng::new(1, 0);
        let d = Dims::new(1, 2, 2, 4, 4).unwrap();
        let x0 = Tensor::<f64>::gaussian(d, &mut rng);
        let e = Tensor::<f64>::gaussian(d, &mut rng);
        let a = krnr_recursive(&x0, &e, 0.4, 1).unwrap();
        let b = crate::schedule::forward_diffuse(&x0, &e, 0.4).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn near_one_alpha_recovers_pivot() {
        let x0 = scalar(2.5);
        let e = scalar(-1.0);
        for k in [1, 5, 20] {
            let out = krnr_recursive(&x0, &e, 1.0 - 1e-12, k).unwrap();
            assert!((out.as_slice()[0] - 2.5).abs() < 1e-5);
        }
    }

    #[test]
    fn limit_at_large_depth() {
        let c = krnr_coefficients(0.75, 200.0).unwrap();
        assert!((c.c_x0 - 1.732_050_807_568_877).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_depth() {
        for a in [1e-4, 0.01, 0.5, 0.99] {
            let mut prev = krnr_coefficients(a, 0.0).unwrap();
            for k in 1..50 {
                let c = krnr_coefficients(a, k as f64 * 0.5).unwrap();
                // Past r^k ~ 1e-16 the coefficient sits on its limit in f64.
                if prev.c_eps > 1e-12 {
                    assert!(c.c_x0 > prev.c_x0);
                }
                assert!(c.c_eps < prev.c_eps);
                assert!(c.c_x0 <= c.limit_x0 * (1.0 + 1e-15));
                prev = c;
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(krnr_coefficients(0.0, 1.0).is_err());
        assert!(krnr_coefficients(1.0, 1.0).is_err());
        assert!(krnr_coefficients(0.5, -1.0).is_err());
        let x = scalar(1.0);
        assert!(krnr_recursive(&x, &x, 0.5, 0).is_err());
        assert!(adaptive_krnr(&x, &x, 0.5, 3.0, 4).is_err());
        assert!(adaptive_krnr(&x, &x, 0.5, 3.0, 0).is_err());
        // delta may equal ceil(k) for fractional k.
        assert!(check_depth(2.5, 3).is_ok());
    }

    #[test]
    fn adaptive_identity_when_delta_equals_k() {
        let mut rng = Rng::new(2, 0);
        let d = Dims::new(1, 2, 4, 8, 8).unwrap();
        let x0 = Tensor::<f32>::gaussian(d, &mut rng);
        let e = Tensor::<f32>::gaussian(d, &mut rng);
        let direct = krnr_closed_continuous(&x0, &e, 0.2, 5.0).unwrap();
        let adaptive = adaptive_krnr(&x0, &e, 0.2, 5.0, 5).unwrap();
        assert!(direct.max_abs_diff(&adaptive) < 1e-6);
    }

    #[test]
    fn adaptive_shrinks_variance() {
        let mut rng = Rng::new(3, 0);
        let d = Dims::new(1, 2, 4, 16, 16).unwrap();
        let x0 = Tensor::<f64>::gaussian(d, &mut rng).map(|v| v + 0.5);
        let e = Tensor::<f64>::gaussian(d, &mut rng);
        let a = 0.1;
        let deep = krnr_closed_discrete(&x0, &e, a, 10).unwrap();
        let reference = krnr_closed_discrete(&x0, &e, a, 3).unwrap();
        let out = adaptive_krnr(&x0, &e, a, 10.0, 3).unwrap();
        let (so, sd, sr) = (stats(&out), stats(&deep), stats(&reference));
        assert!(so.variance / sd.variance < 1.0);
        for c in 0..4 {
            assert!((so.channel_std[c] - sr.channel_std[c]).abs() < 1e-5);
            assert!((so.channel_mean[c] - sr.channel_mean[c]).abs() < 1e-5);
        }
    }

    #[test]
    fn params_validate() {
        let s = NoiseSchedule::default_zero_terminal();
        let a = KrnrParams::default().validate(&s).unwrap();
        assert!(a > 0.0 && a < 1.0);
        let bad = KrnrParams { t: 1000, ..KrnrParams::default() };
        assert!(bad.validate(&s).is_err());
    }
}
