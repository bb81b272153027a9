//! The one-point rate function Φ(λ): the exact polylogarithm formula with its
//! branch point and the three limiting power laws.

mod polylog;

pub use polylog::{polylog, polylog_ratio_remainder, polylog_remainder};

use crate::error::{Error, Result};
use crate::quad::golden_min;
use crate::special::zeta;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// λ_c = log ζ(3/2).
pub fn lambda_c() -> f64 {
    zeta(1.5).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    BelowCritical,
    AboveCritical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMethod {
    Exact,
    Quadratic,
    FiveHalves,
    ThreeHalves,
}

impl PhiMethod {
    pub fn tag(self) -> &'static str {
        match self {
            PhiMethod::Exact => "exact",
            PhiMethod::Quadratic => "quadratic",
            PhiMethod::FiveHalves => "five-halves",
            PhiMethod::ThreeHalves => "three-halves",
        }
    }
}

impl fmt::Display for PhiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Asymptotic regimes of Φ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Φ(λ) ≈ λ²/√(2π) as λ → 0.
    Quadratic,
    /// Φ(λ) ≈ (4/(15π))|λ|^{5/2} as λ → −∞.
    LowerFiveHalves,
    /// Φ(λ) ≈ (4/3)λ^{3/2} as λ → +∞.
    UpperThreeHalves,
}

impl Regime {
    pub fn method(self) -> PhiMethod {
        match self {
            Regime::Quadratic => PhiMethod::Quadratic,
            Regime::LowerFiveHalves => PhiMethod::FiveHalves,
            Regime::UpperThreeHalves => PhiMethod::ThreeHalves,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhiEvaluation {
    pub lambda: f64,
    pub value: f64,
    pub branch: Branch,
    /// Minimizer (stationary point above λ_c) in the z variable.
    pub z_opt: f64,
    pub method: PhiMethod,
}

#[derive(Clone, Copy, Debug)]
pub struct PhiConfig {
    /// Exponent p on (−log(−z)) in the above-critical branch.
    pub log_exponent: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig { log_exponent: 1.5 }
    }
}

/// Φ(λ) from the exact formula with the default configuration.
pub fn phi_exact(lambda: f64) -> Result<PhiEvaluation> {
    phi_exact_with(lambda, PhiConfig::default())
}

pub fn phi_exact_with(lambda: f64, cfg: PhiConfig) -> Result<PhiEvaluation> {
    if !lambda.is_finite() {
        return Err(Error::domain(format!("λ must be finite, got {lambda}")));
    }
    if !(cfg.log_exponent > 0.0) {
        return Err(Error::domain("log exponent must be positive"));
    }
    let norm = (4.0 * PI).sqrt();
    if lambda == 0.0 {
        return Ok(PhiEvaluation {
            lambda,
            value: 0.0,
            branch: Branch::BelowCritical,
            z_opt: 0.0,
            method: PhiMethod::Exact,
        });
    }
    let lc = lambda_c();
    if lambda <= lc {
        let (z, f) = below_critical(lambda)?;
        Ok(PhiEvaluation {
            lambda,
            value: (-f / norm).max(0.0),
            branch: Branch::BelowCritical,
            z_opt: z,
            method: PhiMethod::Exact,
        })
    } else {
        let (z, g) = above_critical(lambda, cfg.log_exponent)?;
        Ok(PhiEvaluation {
            lambda,
            value: -g / norm,
            branch: Branch::AboveCritical,
            z_opt: z,
            method: PhiMethod::Exact,
        })
    }
}

// The objective z e^λ + Li_{5/2}(−z) = z·expm1(λ) + [Li_{5/2}(−z) + z] is
// minimized in u = log|z|, which keeps both tails well scaled.
fn below_critical(lambda: f64) -> Result<(f64, f64)> {
    let em1 = lambda.exp_m1();
    let sign = if lambda < 0.0 { 1.0 } else { -1.0 };
    let zu = |u: f64| sign * u.exp();
    // Derivative of the objective in z: e^λ + Li_{3/2}(−z)/z.
    // Small |z| uses the remainder forms, large |z| the direct ones, so
    // neither side cancels.
    let slope = |u: f64| -> Result<f64> {
        let z = zu(u);
        Ok(if z.abs() <= 0.5 { em1 + polylog_ratio_remainder(1.5, z)? } else { lambda.exp() + polylog(1.5, z)? / z })
    };
    let objective = |u: f64| -> f64 {
        let z = zu(u);
        let v = if z.abs() <= 0.5 {
            polylog_remainder(2.5, z).map(|r| z * em1 + r)
        } else {
            polylog(2.5, z).map(|li| z * lambda.exp() + li)
        };
        v.unwrap_or(f64::NAN)
    };
    // Derivative in u carries the sign of z.
    let du = |u: f64| -> Result<f64> { Ok(sign * slope(u)?) };
    let guess = if lambda < 0.0 {
        (2f64.powf(1.5) * -em1).ln().max(-lambda + 1.5 * (-lambda).ln())
    } else {
        (2f64.powf(1.5) * em1).ln().min(-0.5)
    };
    let (mut a, mut b) = (guess - 1.0, guess + 1.0);
    let upper_cap = if lambda < 0.0 { 700.0 } else { 0.0 };
    b = b.min(upper_cap);
    let mut step = 1.0;
    let mut guard = 0;
    while du(a)? > 0.0 {
        a -= step;
        step *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::numeric(format!("Φ({lambda}): lower bracket not found")));
        }
    }
    step = 1.0;
    while b < upper_cap && du(b)? < 0.0 {
        b = (b + step).min(upper_cap);
        step *= 2.0;
        guard += 1;
        if guard > 120 {
            return Err(Error::numeric(format!("Φ({lambda}): upper bracket not found")));
        }
    }
    let (u, f) = golden_min(objective, a, b, 1e-11);
    if !f.is_finite() {
        return Err(Error::numeric(format!("Φ({lambda}): non-finite objective")));
    }
    Ok((zu(u), f))
}

// Above λ_c the literal minimum over z ∈ [−1, 0) is unbounded below when
// p > 1, so the value is the stationary point: a maximum in μ = −log(−z),
// searched in σ = √μ because the root sits at μ ≈ (λ−λ_c)²/(4π).
fn above_critical(lambda: f64, p: f64) -> Result<(f64, f64)> {
    let c = 8.0 * PI.sqrt() / 3.0;
    let g = |sig: f64| -> f64 {
        let mu = sig * sig;
        let li = polylog(2.5, -(-mu).exp()).unwrap_or(f64::NAN);
        -(lambda - mu).exp() + li - c * mu.powf(p)
    };
    let dg =
        |mu: f64| -> Result<f64> { Ok((lambda - mu).exp() - polylog(1.5, -(-mu).exp())? - c * p * mu.powf(p - 1.0)) };
    let mut hi = lambda.sqrt() + 1.0;
    let mut guard = 0;
    while dg(hi * hi)? > 0.0 {
        hi *= 1.5;
        guard += 1;
        if guard > 60 {
            return Err(Error::numeric(format!("Φ({lambda}): no stationary point found")));
        }
    }
    let (sig, neg) = golden_min(|s| -g(s), 0.0, hi, 1e-12);
    // The golden search never evaluates the endpoint itself.
    let (sig, val) = if g(0.0) > -neg { (0.0, g(0.0)) } else { (sig, -neg) };
    if !val.is_finite() {
        return Err(Error::numeric(format!("Φ({lambda}): non-finite objective")));
    }
    Ok((-(-sig * sig).exp(), val))
}

/// The limiting power law of Φ in the given regime.
pub fn phi_asymptotic(lambda: f64, regime: Regime) -> Result<f64> {
    match regime {
        Regime::Quadratic => Ok(lambda * lambda / (2.0 * PI).sqrt()),
        Regime::LowerFiveHalves if lambda < 0.0 => Ok(4.0 / (15.0 * PI) * (-lambda).powf(2.5)),
        Regime::UpperThreeHalves if lambda > 0.0 => Ok(4.0 / 3.0 * lambda.powf(1.5)),
        _ => Err(Error::domain(format!("λ = {lambda} has the wrong sign for {regime:?}"))),
    }
}
