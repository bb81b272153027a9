//! The explicit optimal deviation ρ*(t,x) = −(r(t)/2π)(1 − x²/ℓ(t)²)₊ with
//! ℓ = 1/r, its L² geometry and the scaling (ρ)_κ.
//!
//! With r = (π/2)(1 + u²) the implicit relation for r becomes
//! u/(1+u²) + arctan u = (π/2)|t−1|, and equivalently
//! H(u) := arctan(1/u) − u/(1+u²) = (π/2)·min(t, 2−t),
//! which is well conditioned near both endpoints where u → ∞.

use crate::error::{Error, Result};
use crate::grid::{Potential, ScalarField, Slice, SpaceTimeGrid, HORIZON};
use crate::quad::{bisect, gauss_legendre_on};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

/// r at the midpoint t = 1.
pub const R_CENTER: f64 = FRAC_PI_2;

/// −∫ρ*(t,x)dx, constant in t.
pub const SLICE_MASS: f64 = 2.0 / (3.0 * PI);

/// ‖ρ*‖² = 8/(15π).
pub fn rho_star_norm_sq_exact() -> f64 {
    8.0 / (15.0 * PI)
}

fn h_of_u(u: f64) -> f64 {
    if u < 4.0 {
        (1.0 / u).atan() - u / (1.0 + u * u)
    } else {
        // Σ_{k≥1} (−1)^{k+1} (2k/(2k+1)) u^{−(2k+1)}
        let w = 1.0 / (u * u);
        let mut p = w / u;
        let mut sum = 0.0;
        for k in 1..=20 {
            let kf = k as f64;
            let term = 2.0 * kf / (2.0 * kf + 1.0) * p;
            sum += if k % 2 == 1 { term } else { -term };
            p *= w;
        }
        sum
    }
}

/// Distance from `t` to the nearer endpoint, checked to lie in (0, 1].
fn endpoint_distance(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < HORIZON) {
        return Err(Error::domain(format!("r(t) needs t ∈ (0,2), got {t}")));
    }
    Ok(t.min(HORIZON - t))
}

fn solve_u(tau: f64) -> Result<f64> {
    if tau >= 1.0 {
        return Ok(0.0);
    }
    let target = FRAC_PI_2 * tau;
    // H decreases from π/2 to 0; H(u) ≈ (2/3)u^{−3} for large u.
    let mut hi = (2.0 / (3.0 * target)).cbrt().max(1.0) * 2.0;
    while h_of_u(hi) > target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numeric(format!("r bracket exhausted at τ = {tau}")));
        }
    }
    let u = bisect(|u| h_of_u(u) - target, 0.0, hi, 0.0)?;
    Ok(u)
}

/// r(t) for t ∈ (0,2).
pub fn solve_r(t: f64) -> Result<f64> {
    let tau = endpoint_distance(t)?;
    let u = solve_u(tau)?;
    Ok(R_CENTER * (1.0 + u * u))
}

/// Residual of the implicit relation as written in terms of r:
/// (r−π/2)^{1/2}/(r·π/2) + (2/π)^{3/2} arctan((r/(π/2) − 1)^{1/2}) − (2/π)^{1/2}|t−1|.
pub fn implicit_residual(r: f64, t: f64) -> f64 {
    let a = R_CENTER;
    let lhs = (r - a).max(0.0).sqrt() / (r * a) + (1.0 / a).powf(1.5) * ((r / a - 1.0).max(0.0).sqrt()).atan();
    lhs - (1.0 / a).sqrt() * (t - 1.0).abs()
}

/// ℓ(t) = 1/r(t) with ℓ(0) = ℓ(2) = 0.
pub fn ell(t: f64) -> f64 {
    if t <= 0.0 || t >= HORIZON {
        0.0
    } else {
        1.0 / solve_r(t).unwrap_or(f64::INFINITY)
    }
}

/// ℓ'(t) = −√(2/π)·√(r − π/2)·sgn(t − 1), from the r-equation.
pub fn ell_derivative(t: f64) -> Result<f64> {
    let r = solve_r(t)?;
    let s = if t < 1.0 {
        1.0
    } else if t > 1.0 {
        -1.0
    } else {
        0.0
    };
    Ok(s * (2.0 / PI).sqrt() * (r - R_CENTER).max(0.0).sqrt())
}

/// Right side of r' = √(2/π) r² √(r − π/2) for t > 1.
pub fn r_ode_rhs(r: f64) -> f64 {
    (2.0 / PI).sqrt() * r * r * (r - R_CENTER).max(0.0).sqrt()
}

/// ρ*(t,x); zero for t ∉ (0,2).
pub fn rho_star(t: f64, x: f64) -> f64 {
    match solve_r(t) {
        Ok(r) => rho_from_r(r, x),
        Err(_) => 0.0,
    }
}

#[inline]
fn rho_from_r(r: f64, x: f64) -> f64 {
    let q = 1.0 - (x * r) * (x * r);
    if q > 0.0 {
        -r / (2.0 * PI) * q
    } else {
        0.0
    }
}

/// ∫_a^b r(t) dt in closed form. With r = (π/2)(1+u²) the substitution
/// gives ∫_t^1 r = 2 arctan u(t) on each half, so every cell integral is a
/// difference of arctangents of 1/u, which stays accurate near both ends.
pub fn integral_r_exact(a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= HORIZON) {
        return Err(Error::domain(format!("need 0 ≤ a ≤ b ≤ 2, got [{a}, {b}]")));
    }
    // R(t) − R(0) for t ≤ 1 is 2 arctan(1/u); for t > 1 it is 2π − 2 arctan(1/u).
    let tail = |t: f64| -> Result<f64> {
        let tau = t.min(HORIZON - t);
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let u = solve_u(tau)?;
        Ok(if u == 0.0 { PI } else { 2.0 * (1.0 / u).atan() })
    };
    let (ta, tb) = (tail(a)?, tail(b)?);
    Ok(match (a <= 1.0, b <= 1.0) {
        (true, true) => tb - ta,
        (false, false) => ta - tb,
        _ => (PI - ta) + (PI - tb),
    })
}

/// ∫_a^b r(t) dt for 0 ≤ a < b ≤ 2 by quadrature.
///
/// Each endpoint singularity r ~ τ^{−2/3} is removed by τ = w³ and the
/// pieces are integrated by composite Gauss–Legendre.
pub fn integral_r_between(a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= HORIZON) {
        return Err(Error::domain(format!("need 0 ≤ a < b ≤ 2, got [{a}, {b}]")));
    }
    // Split at 1 so each piece has at most one singular end.
    let mut total = 0.0;
    if a < 1.0 {
        total += graded_piece(a, b.min(1.0), false)?;
    }
    if b > 1.0 {
        total += graded_piece(a.max(1.0), b, true)?;
    }
    Ok(total)
}

// Integrates r over [lo, hi] inside one half; `right` selects the half (1,2],
// where the singular end is 2.
fn graded_piece(lo: f64, hi: f64, right: bool) -> Result<f64> {
    // Distance to the singular end on each side of the piece.
    let (tau_a, tau_b) = if right { (HORIZON - hi, HORIZON - lo) } else { (lo, hi) };
    let (wa, wb) = (tau_a.cbrt(), tau_b.cbrt());
    let panels = 48;
    let (gx, gw) = gauss_legendre_on(10, 0.0, 1.0);
    let h = (wb - wa) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let w0 = wa + p as f64 * h;
        for (x, wt) in gx.iter().zip(&gw) {
            let w = w0 + x * h;
            let tau = w * w * w;
            // r depends on τ only; going through t = 2 − τ would round τ away.
            let r = R_CENTER * (1.0 + solve_u(tau)?.powi(2));
            total += wt * h * r * 3.0 * w * w;
        }
    }
    Ok(total)
}

/// ∫₀² r(t) dt (equals 2π).
pub fn integral_r() -> Result<f64> {
    integral_r_between(0.0, HORIZON)
}

/// The scaling convention for (ρ)_κ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScalingConvention {
    /// κρ(t, κ^{−1/2}x): ‖(ρ)_κ‖² = κ^{5/2}‖ρ‖².
    #[default]
    Standard,
    /// κρ(t, κ^{1/2}x), as printed in the source text.
    Literal,
}

impl ScalingConvention {
    fn spatial_factor(self, kappa: f64) -> f64 {
        match self {
            ScalingConvention::Standard => kappa.sqrt().recip(),
            ScalingConvention::Literal => kappa.sqrt(),
        }
    }
}

/// (ρ)_κ sampled on the grid of `rho` by linear interpolation in x.
pub fn scale_deviation(rho: &ScalarField, kappa: f64) -> Result<ScalarField> {
    scale_deviation_with(rho, kappa, ScalingConvention::Standard)
}

pub fn scale_deviation_with(rho: &ScalarField, kappa: f64, conv: ScalingConvention) -> Result<ScalarField> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("κ must be positive, got {kappa}")));
    }
    let grid = rho.grid();
    let c = conv.spatial_factor(kappa);
    let xs = grid.xs();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_t() {
        values.extend(xs.iter().map(|&x| kappa * rho.interp_row(i, c * x)));
    }
    ScalarField::from_values(grid, values)
}

/// The profile r, ℓ and the field ρ*, optionally scaled as (ρ*)_κ.
#[derive(Clone, Copy, Debug)]
pub struct InstantonProfile {
    kappa: f64,
    spatial: f64,
}

impl Default for InstantonProfile {
    fn default() -> Self {
        InstantonProfile { kappa: 1.0, spatial: 1.0 }
    }
}

impl InstantonProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// (ρ*)_κ under the given convention.
    pub fn scaled(kappa: f64, conv: ScalingConvention) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("κ must be positive, got {kappa}")));
        }
        Ok(InstantonProfile { kappa, spatial: conv.spatial_factor(kappa) })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r(&self, t: f64) -> Result<f64> {
        solve_r(t)
    }

    /// Support half-width at time t.
    pub fn half_width(&self, t: f64) -> f64 {
        ell(t) / self.spatial
    }

    pub fn in_support(&self, t: f64, x: f64) -> bool {
        x.abs() <= self.half_width(t)
    }

    /// ‖·‖² of this profile, exact.
    pub fn norm_sq(&self) -> f64 {
        self.kappa * self.kappa / self.spatial * rho_star_norm_sq_exact()
    }

    /// ‖·‖² by quadrature: ∫ (4/(15π²)) r(t) dt follows from Gauss–Legendre
    /// in x over each support slice, so this reuses the graded ∫r rule.
    pub fn norm_sq_quadrature(&self) -> Result<f64> {
        let (gx, gw) = gauss_legendre_on(6, -1.0, 1.0);
        // Slice integral of ρ*² at r is r·C with C independent of t.
        let c: f64 = gx.iter().zip(&gw).map(|(s, w)| w * rho_from_r(1.0, *s).powi(2)).sum();
        Ok(self.kappa * self.kappa / self.spatial * c * integral_r()?)
    }

    pub fn sample(&self, grid: &SpaceTimeGrid) -> ScalarField {
        Potential::sample(self, grid).into_owned()
    }
}

impl Potential for InstantonProfile {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.kappa * rho_star(t, self.spatial * x)
    }

    fn slice(&self, t: f64) -> Slice<'_> {
        match solve_r(t) {
            Ok(r) => {
                let (k, c) = (self.kappa, self.spatial);
                Box::new(move |x| k * rho_from_r(r, c * x))
            }
            Err(_) => Box::new(|_| 0.0),
        }
    }

    // Closed form: the profile is a quadratic on [−b, b], b = 1/(c r).
    fn smoothed_slice(&self, t: f64, sigma: f64) -> Slice<'_> {
        if sigma <= 0.0 {
            return self.slice(t);
        }
        match solve_r(t) {
            Ok(r) => {
                let (k, c) = (self.kappa, self.spatial);
                let b = 1.0 / (c * r);
                let a2 = (c * r) * (c * r);
                Box::new(move |m| {
                    let (lo, hi) = ((-b - m) / sigma, (b - m) / sigma);
                    let (p0, p1, p2) = truncated_normal_moments(lo, hi);
                    // E[(m + σξ)²; lo < ξ < hi]
                    let second = m * m * p0 + 2.0 * m * sigma * p1 + sigma * sigma * p2;
                    -k * r / (2.0 * PI) * (p0 - a2 * second)
                })
            }
            Err(_) => Box::new(|_| 0.0),
        }
    }
}

// ∫_lo^hi ξ^j φ(ξ) dξ for j = 0, 1, 2.
fn truncated_normal_moments(lo: f64, hi: f64) -> (f64, f64, f64) {
    let phi = |z: f64| if z.is_finite() { (-0.5 * z * z).exp() / (2.0 * PI).sqrt() } else { 0.0 };
    // Φ(hi) − Φ(lo) from whichever tail keeps precision.
    let p0 = if lo >= 0.0 {
        0.5 * (libm::erfc(lo / SQRT_2) - libm::erfc(hi / SQRT_2))
    } else if hi <= 0.0 {
        0.5 * (libm::erfc(-hi / SQRT_2) - libm::erfc(-lo / SQRT_2))
    } else {
        1.0 - 0.5 * (libm::erfc(hi / SQRT_2) + libm::erfc(-lo / SQRT_2))
    };
    let (fl, fh) = (phi(lo), phi(hi));
    let p1 = fl - fh;
    let p2 = p0 + lo * fl - hi * fh;
    (p0, p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_closed_form_h_agree() {
        for u in [3.9f64, 4.0, 4.1, 6.0] {
            let direct = (1.0 / u).atan() - u / (1.0 + u * u);
            let w = 1.0 / (u * u);
            let series = (2.0 / 3.0) * w / u - (4.0 / 5.0) * w * w / u + (6.0 / 7.0) * w.powi(3) / u;
            assert!((direct - h_of_u(u)).abs() < 1e-14, "{u}");
            assert!((series - h_of_u(u)).abs() < 1e-5, "{u}");
        }
    }

    #[test]
    fn center_and_domain() {
        assert_eq!(solve_r(1.0).unwrap(), R_CENTER);
        assert!(solve_r(0.0).is_err());
        assert!(solve_r(2.0).is_err());
        assert_eq!(rho_star(0.0, 0.0), 0.0);
        assert_eq!(rho_star(2.0, 0.0), 0.0);
    }
}
