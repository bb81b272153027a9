use crate::error::{Error, Result};
use crate::grid::{Potential, ScalarField, SpaceTimeGrid, HORIZON};
use crate::heat_kernel::density;
use crate::quad::{gauss_hermite_normal, gauss_legendre_on};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Highest chaos order supported.
pub const MAX_ORDER: usize = 4;

/// Grid and quadrature for the chaos recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosConfig {
    /// Uniform time nodes on [0, 2].
    pub nt: usize,
    pub nx: usize,
    pub half_width: f64,
    /// Gauss–Legendre nodes in the angle variable of the time integral.
    pub n_time: usize,
    pub n_hermite: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig { nt: 65, nx: 241, half_width: 6.0, n_time: 48, n_hermite: 20 }
    }
}

/// The terms Ξ_n(ρ;t,x) = p(t,x)·g_n(t,x) of the Duhamel series.
///
/// Dividing out the kernel turns the recursion into a bridge average,
/// g_n(t,x) = ∫₀ᵗ E[(g_{n−1}ρ)(s, xs/t + σ_s ξ)] ds with σ_s² = s(t−s)/t.
/// The time integral uses s = t(1 − cos θ)/2 with Gauss–Legendre in θ, which
/// absorbs the s^{−1/2} end behaviour of kernel-shaped fields; the
/// expectation uses Gauss–Hermite. g_0 = 1 and each g_n for n < order is
/// stored on a uniform grid and interpolated bilinearly.
pub struct ChaosExpansion<'a, P: Potential + ?Sized> {
    rho: &'a P,
    cfg: ChaosConfig,
    grid: SpaceTimeGrid,
    fields: Vec<ScalarField>,
    angles: (Vec<f64>, Vec<f64>),
    hermite: (Vec<f64>, Vec<f64>),
}

impl<'a, P: Potential + ?Sized> ChaosExpansion<'a, P> {
    /// Prepares terms up to `order` (≤ 4).
    pub fn new(rho: &'a P, order: usize, cfg: ChaosConfig) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::domain(format!("chaos order {order} exceeds {MAX_ORDER}")));
        }
        if cfg.n_time < 2 || cfg.n_hermite < 2 {
            return Err(Error::config("chaos quadrature needs at least two nodes"));
        }
        let grid = SpaceTimeGrid::uniform(cfg.nt, cfg.nx, cfg.half_width)?;
        let mut this = ChaosExpansion {
            rho,
            angles: gauss_legendre_on(cfg.n_time, 0.0, PI),
            hermite: gauss_hermite_normal(cfg.n_hermite),
            cfg,
            grid,
            fields: Vec::new(),
        };
        for n in 1..order {
            let field = this.build(n)?;
            this.fields.push(field);
        }
        Ok(this)
    }

    pub fn config(&self) -> &ChaosConfig {
        &self.cfg
    }

    /// g_n(t,x) = Ξ_n/p.
    pub fn normalized_term(&self, n: usize, t: f64, x: f64) -> Result<f64> {
        if n == 0 {
            return Ok(1.0);
        }
        if n > self.fields.len() + 1 {
            return Err(Error::domain(format!("order {n} was not prepared")));
        }
        if !(t > 0.0 && t <= HORIZON) {
            return Err(Error::domain(format!("chaos terms need t ∈ (0, 2], got {t}")));
        }
        Ok(self.bridge_integral(n, t, x))
    }

    /// Ξ_n(ρ;t,x).
    pub fn term(&self, n: usize, t: f64, x: f64) -> Result<f64> {
        Ok(density(t, x) * self.normalized_term(n, t, x)?)
    }

    /// Σ_{n ≤ order} g_n(t,x), the truncated series for Z/p.
    pub fn partial_ratio(&self, order: usize, t: f64, x: f64) -> Result<f64> {
        (0..=order).map(|n| self.normalized_term(n, t, x)).sum()
    }

    fn build(&self, n: usize) -> Result<ScalarField> {
        let times = self.grid.times().to_vec();
        let xs = self.grid.xs();
        let rows: Vec<Vec<f64>> = times
            .par_iter()
            .map(|&t| if t == 0.0 { vec![0.0; xs.len()] } else { self.bridge_integral_row(n, t, &xs) })
            .collect();
        ScalarField::from_values(&self.grid, rows.concat())
    }

    fn bridge_integral(&self, n: usize, t: f64, x: f64) -> f64 {
        self.bridge_integral_row(n, t, &[x])[0]
    }

    fn bridge_integral_row(&self, n: usize, t: f64, xs: &[f64]) -> Vec<f64> {
        let (th, tw) = &self.angles;
        let (xi, xw) = &self.hermite;
        let prev = if n >= 2 { Some(&self.fields[n - 2]) } else { None };
        let mut out = vec![0.0; xs.len()];
        for (&a, &wa) in th.iter().zip(tw) {
            let s = 0.5 * t * (1.0 - a.cos());
            let ds = 0.5 * t * a.sin() * wa;
            let sigma = (s * (t - s) / t).max(0.0).sqrt();
            let rho = self.rho.slice(s);
            for (o, &x) in out.iter_mut().zip(xs) {
                let mean = x * s / t;
                let e: f64 = xi
                    .iter()
                    .zip(xw)
                    .map(|(z, w)| {
                        let y = mean + sigma * z;
                        let g = prev.map_or(1.0, |f| f.value(s, y));
                        w * g * rho(y)
                    })
                    .sum();
                *o += ds * e;
            }
        }
        out
    }
}

/// Ξ_n(ρ;t,x) with the default chaos grid.
pub fn chaos_term<P: Potential + ?Sized>(rho: &P, n: usize, t: f64, x: f64) -> Result<f64> {
    ChaosExpansion::new(rho, n, ChaosConfig::default())?.term(n, t, x)
}
