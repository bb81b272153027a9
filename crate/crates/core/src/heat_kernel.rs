//! Standard heat kernel p(t,x) = exp(−x²/2t)/√(2πt) and the kernel integrals
//! used by the near-center analysis.

use crate::error::{Error, Result};
use crate::quad::trapezoid_uniform;
use std::f64::consts::PI;

/// Default truncation for kernel integrals.
pub const DEFAULT_HALF_WIDTH: f64 = 10.0;
/// Default spatial step for kernel integrals.
pub const DEFAULT_STEP: f64 = 1.0 / 256.0;

/// 2^{−5/2} π^{−1/2}.
pub fn overlap_constant() -> f64 {
    2f64.powf(-2.5) / PI.sqrt()
}

#[inline]
pub(crate) fn density(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Heat kernel with diffusivity `nu`: exp(−x²/2νt)/√(2πνt).
#[inline]
pub(crate) fn density_nu(nu: f64, t: f64, x: f64) -> f64 {
    density(nu * t, x)
}

/// p(t,x). Fails for t ≤ 0 or non-finite input.
pub fn eval_kernel(t: f64, x: f64) -> Result<f64> {
    KernelPoint::new(t, x).map(|p| p.eval())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPoint {
    t: f64,
    x: f64,
}

impl KernelPoint {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("heat kernel needs t > 0, got {t}")));
        }
        if !x.is_finite() {
            return Err(Error::domain(format!("heat kernel needs finite x, got {x}")));
        }
        Ok(KernelPoint { t, x })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn eval(&self) -> f64 {
        density(self.t, self.x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Normalization {
    pub mass: f64,
    /// Set when the truncated mass falls below 1 − 1e−6.
    pub truncated: bool,
}

/// ∫_{−L}^{L} p(t,x) dx by the composite trapezoid rule with the default step.
pub fn kernel_normalization(t: f64, half_width: f64) -> Result<Normalization> {
    kernel_normalization_with(t, half_width, DEFAULT_STEP)
}

pub fn kernel_normalization_with(t: f64, half_width: f64, step: f64) -> Result<Normalization> {
    KernelPoint::new(t, 0.0)?;
    if !(half_width > 0.0 && step > 0.0) {
        return Err(Error::domain("truncation and step must be positive"));
    }
    let n = (2.0 * half_width / step).ceil() as usize;
    let h = 2.0 * half_width / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| density(t, -half_width + i as f64 * h)).collect();
    let mass = trapezoid_uniform(&values, h);
    Ok(Normalization { mass, truncated: mass < 1.0 - 1e-6 })
}

/// The integrand p(2−s,y)² p(s,y)² of the overlap identity.
pub fn overlap_integrand(s: f64, y: f64) -> f64 {
    let a = density(2.0 - s, y);
    let b = density(s, y);
    a * a * b * b
}

/// Resolution of the overlap quadrature.
#[derive(Clone, Copy, Debug)]
pub struct OverlapQuadrature {
    /// Midpoint nodes in the angle θ with s = 1 − cos θ.
    pub n_angle: usize,
    /// Trapezoid step in the standardized variable y/σ(s).
    pub step: f64,
    /// Truncation in the standardized variable.
    pub half_width: f64,
}

impl Default for OverlapQuadrature {
    fn default() -> Self {
        OverlapQuadrature { n_angle: 64, step: 1.0 / 16.0, half_width: 10.0 }
    }
}

impl OverlapQuadrature {
    pub fn refined(self) -> Self {
        OverlapQuadrature { n_angle: 2 * self.n_angle, step: 0.5 * self.step, ..self }
    }
}

/// ∫₀²∫ p(2−s,y)² p(s,y)² dy ds with the default resolution.
pub fn kernel_overlap_integral() -> f64 {
    kernel_overlap_integral_with(OverlapQuadrature::default())
}

/// Overlap integral on the substituted grid: s = 1 − cos θ removes the
/// s^{−1/2} endpoint singularity and y = σ(s)η with σ² = s(2−s)/4 keeps the
/// Gaussian slices at a fixed width. Both directions use composite rules on
/// uniform grids.
pub fn kernel_overlap_integral_with(q: OverlapQuadrature) -> f64 {
    let n_eta = (2.0 * q.half_width / q.step).round() as usize;
    let h_eta = 2.0 * q.half_width / n_eta as f64;
    let h_theta = PI / q.n_angle as f64;
    let mut total = 0.0;
    let mut slice = vec![0.0; n_eta + 1];
    for k in 0..q.n_angle {
        let theta = (k as f64 + 0.5) * h_theta;
        let s = 1.0 - theta.cos();
        let sigma = 0.5 * (s * (2.0 - s)).sqrt();
        for (i, v) in slice.iter_mut().enumerate() {
            let y = sigma * (-q.half_width + i as f64 * h_eta);
            *v = overlap_integrand(s, y);
        }
        total += trapezoid_uniform(&slice, h_eta) * sigma * theta.sin() * h_theta;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((eval_kernel(1.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((eval_kernel(2.0, 0.0).unwrap() - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-16);
        assert!(eval_kernel(0.0, 1.0).is_err());
        assert!(eval_kernel(-1.0, 1.0).is_err());
        assert!(eval_kernel(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn integrand_at_center() {
        let v = overlap_integrand(1.0, 0.0);
        assert!((v - (2.0 * PI).powi(-2)).abs() < 1e-16);
    }
}
