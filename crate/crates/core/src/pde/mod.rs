//! The heat equation with potential, ∂_t W = (ν/2)∂_xx W + cρW, started
//! from δ₀ at t = 0.
//!
//! The unscaled problem (ν = 1, c = 1) gives Z(ρ;t,x) and h = log(√(4π)Z).
//! The λ-scaled problem (ν = 1/λ, c = λ) gives h_λ = λ⁻¹ log(W/W_free).
//!
//! On [t0, 2−t0] the solver uses Strang splitting: a θ-scheme half step with
//! the fourth-order compact Laplacian, then the factor exp(c·dt·ρ̄), then
//! another half step. On the two short layers [0, t0] and [2−t0, 2] the
//! potential enters through the Brownian-bridge average
//! D(y) = ∫ E[ρ(u, B_u)] du (through `Potential::smoothed_slice`), so Z(t0,y) = p_ν(t0,y)·exp(c·D(y)). This keeps
//! fields with singular end behaviour, like ρ*, out of the stepping.

mod chaos;
mod config;
mod feynman_kac;

pub use chaos::{chaos_term, ChaosConfig, ChaosExpansion};
pub use config::{parse_key_values, SolverConfig};
pub use feynman_kac::feynman_kac_mc;

use crate::error::{Error, Result};
use crate::grid::{Potential, ScalarField, SpaceTimeGrid, TimeAxis, HORIZON};
use crate::heat_kernel::density_nu;
use crate::quad::{gauss_legendre_on, pairwise_sum};
use serde::Serialize;
use std::borrow::Cow;
use std::f64::consts::PI;

/// Boundary outflow above this is flagged.
pub const BOUNDARY_WARNING: f64 = 1e-8;

// Layer quadrature: Gauss–Legendre in v with u = t0·v³.
const LAYER_NODES: usize = 16;

/// Solver health reported with every solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// ∫ (ν/2)|∂_x W| dt through both walls, relative to the free solve.
    pub boundary_flux: f64,
    pub boundary_warning: bool,
    /// Nodes that went negative during stepping.
    pub negative_nodes: usize,
    /// The sampled potential does not vanish at |x| = L.
    pub support_clipped: bool,
}

/// A forward solve.
#[derive(Clone, Debug)]
pub struct PotentialSolveResult {
    /// W on the solver grid. Rows before t0 hold the free kernel (row 0 is
    /// zero); from t0 on they hold the scheme.
    pub z_field: ScalarField,
    pub t0: f64,
    /// W(2,0) through the end layer.
    pub z_end: f64,
    /// The same quantity for ρ ≡ 0.
    pub z_free_end: f64,
    pub diagnostics: Diagnostics,
    hscale: f64,
    first_row: usize,
}

impl PotentialSolveResult {
    /// Z(ρ;2,0)/p(2,0), normalized by the free solve.
    pub fn ratio(&self) -> f64 {
        self.z_end / self.z_free_end
    }

    /// h(ρ;2,0), or h_λ(ρ;2,0) for a scaled solve.
    pub fn h(&self) -> f64 {
        self.ratio().ln() / self.hscale
    }

    /// log(√(4π)·W(t,x)) from the stored field, for t ≥ t0.
    pub fn h_at(&self, t: f64, x: f64) -> Result<f64> {
        if !(t >= self.t0 && t <= HORIZON) {
            return Err(Error::domain(format!("h_at needs t ∈ [t0, 2], got {t}")));
        }
        let z = self.z_field.value(t, x);
        if z <= 0.0 {
            return Err(Error::numeric(format!("W({t}, {x}) = {z} is not positive")));
        }
        Ok(((4.0 * PI).sqrt() * z).ln())
    }

    pub fn first_row(&self) -> usize {
        self.first_row
    }
}

/// δh(ρ;2,0)/δρ as a density on the solver grid, with the value of h.
#[derive(Clone, Debug)]
pub struct GradientResult {
    pub h: f64,
    pub ratio: f64,
    pub field: ScalarField,
}

// One time step of the scheme: the tridiagonal systems for both half steps.
#[derive(Clone, Debug)]
struct Step {
    dt: f64,
    rhs_diag: f64,
    rhs_off: f64,
    off: f64,
    // Thomas denominators 1/den_j; constant once converged.
    inv_den: Vec<f64>,
}

impl Step {
    fn new(dt: f64, alpha: f64, theta: f64, interior: usize) -> Self {
        let diag = 10.0 / 12.0 + 2.0 * theta * alpha;
        let off = 1.0 / 12.0 - theta * alpha;
        let mut inv_den: Vec<f64> = Vec::new();
        let mut cp = 0.0;
        for _ in 0..interior {
            let inv = 1.0 / (diag - off * cp);
            cp = off * inv;
            if let Some(&last) = inv_den.last() {
                if (inv - last).abs() <= 1e-16 * inv.abs() {
                    break;
                }
            }
            inv_den.push(inv);
        }
        Step {
            dt,
            rhs_diag: 10.0 / 12.0 - 2.0 * (1.0 - theta) * alpha,
            rhs_off: 1.0 / 12.0 + (1.0 - theta) * alpha,
            off,
            inv_den,
        }
    }

    #[inline]
    fn inv(&self, j: usize) -> f64 {
        self.inv_den[j.min(self.inv_den.len() - 1)]
    }

    // One heat half step in place; z[0] and z[n−1] are the Dirichlet walls.
    fn heat(&self, z: &mut [f64], scratch: &mut [f64]) {
        let n = z.len();
        let m = n - 2;
        for i in 0..m {
            scratch[i] = self.rhs_diag * z[i + 1] + self.rhs_off * (z[i] + z[i + 2]);
        }
        scratch[0] *= self.inv(0);
        for i in 1..m {
            scratch[i] = (scratch[i] - self.off * scratch[i - 1]) * self.inv(i);
        }
        for i in (0..m - 1).rev() {
            scratch[i] -= self.off * self.inv(i) * scratch[i + 1];
        }
        z[1..n - 1].copy_from_slice(&scratch[..m]);
        z[0] = 0.0;
        z[n - 1] = 0.0;
    }
}

struct LayerQuad {
    // u/t0 and the weight for ∫₀^{t0} du, per Gauss–Legendre node.
    frac: Vec<f64>,
    weight: Vec<f64>,
}

impl LayerQuad {
    fn new(t0: f64) -> Self {
        let (v, w) = gauss_legendre_on(LAYER_NODES, 0.0, 1.0);
        LayerQuad {
            frac: v.iter().map(|v| v * v * v).collect(),
            weight: v.iter().zip(&w).map(|(v, w)| 3.0 * t0 * v * v * w).collect(),
        }
    }
}

struct Forward<'a> {
    sample: Cow<'a, ScalarField>,
    // Scheme rows k0..=k1 when requested.
    rows: Vec<Vec<f64>>,
    end_weights: Vec<f64>,
    z_end: f64,
    negative_nodes: usize,
    flux: f64,
}

/// Solver for one choice of (ν, c, grid). Construction runs the free solve.
pub struct HeatPotentialSolver {
    cfg: SolverConfig,
    grid: SpaceTimeGrid,
    nu: f64,
    coupling: f64,
    hscale: f64,
    k0: usize,
    k1: usize,
    steps: Vec<Step>,
    layer: LayerQuad,
    kernel_t0: Vec<f64>,
    z_free: f64,
}

impl HeatPotentialSolver {
    /// ν = 1, c = 1: Z(ρ;t,x).
    pub fn standard(cfg: &SolverConfig) -> Result<Self> {
        Self::build(cfg, 1.0, 1.0, 1.0)
    }

    /// ν = 1/λ, c = λ: the λ-scaled equation, h_λ = λ⁻¹ log(W/W_free).
    pub fn scaled(cfg: &SolverConfig, lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("scaled solve needs λ ≥ 1, got {lambda}")));
        }
        let dx = 2.0 * cfg.half_width / (cfg.nx - 1) as f64;
        let need = (2.0 * lambda).powf(-0.5) / 8.0;
        if dx > need {
            return Err(Error::config(format!(
                "dx = {dx} does not resolve viscosity 1/(2λ) at λ = {lambda}; need dx ≤ {need:.3e}"
            )));
        }
        Self::build(cfg, 1.0 / lambda, lambda, lambda)
    }

    fn build(cfg: &SolverConfig, nu: f64, coupling: f64, hscale: f64) -> Result<Self> {
        cfg.validate()?;
        let axis = if cfg.grading <= 1 { TimeAxis::Uniform } else { TimeAxis::Graded(cfg.grading) };
        let grid = SpaceTimeGrid::new(cfg.nt, cfg.nx, cfg.half_width, axis)?;
        let times = grid.times();
        let last = times.len() - 1;
        let k0 = (1..last / 2)
            .min_by(|&a, &b| (times[a] - cfg.t0).abs().total_cmp(&(times[b] - cfg.t0).abs()))
            .ok_or_else(|| Error::config("time grid too coarse for a start layer"))?;
        let t0 = times[k0];
        let k1 = last - k0;
        let dx = grid.dx();
        if (nu * t0).sqrt() < 3.0 * dx {
            return Err(Error::config(format!(
                "kernel width √(νt0) = {:.3e} at t0 = {t0} is below 3 dx = {:.3e}",
                (nu * t0).sqrt(),
                3.0 * dx
            )));
        }
        let sd = (2.0 * nu).sqrt();
        if cfg.half_width < 6.0 * sd {
            return Err(Error::config(format!(
                "L = {} is below six free-kernel widths ({:.3})",
                cfg.half_width,
                6.0 * sd
            )));
        }
        let steps = (k0..last)
            .map(|k| {
                let dt = times[k + 1] - times[k];
                Step::new(dt, nu * dt / (4.0 * dx * dx), cfg.theta, cfg.nx - 2)
            })
            .collect();
        let kernel_t0 = grid.xs().iter().map(|&x| density_nu(nu, t0, x)).collect();
        let mut solver = HeatPotentialSolver {
            cfg: cfg.clone(),
            grid,
            nu,
            coupling,
            hscale,
            k0,
            k1,
            steps,
            layer: LayerQuad::new(t0),
            kernel_t0,
            z_free: 1.0,
        };
        let free = ScalarField::zeros(&solver.grid);
        solver.z_free = solver.forward(&free, false)?.z_end;
        Ok(solver)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// The snapped start time.
    pub fn t0(&self) -> f64 {
        self.grid.times()[self.k0]
    }

    pub fn viscosity(&self) -> f64 {
        self.nu
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// W_free(2,0).
    pub fn free_value(&self) -> f64 {
        self.z_free
    }

    /// h(ρ;2,0) (or h_λ) without storing the field.
    pub fn h<P: Potential + ?Sized>(&self, rho: &P) -> Result<f64> {
        let f = self.forward(rho, false)?;
        Ok((f.z_end / self.z_free).ln() / self.hscale)
    }

    /// Z(ρ;2,0)/p(2,0) (or W/W_free).
    pub fn ratio<P: Potential + ?Sized>(&self, rho: &P) -> Result<f64> {
        Ok(self.forward(rho, false)?.z_end / self.z_free)
    }

    pub fn solve<P: Potential + ?Sized>(&self, rho: &P) -> Result<PotentialSolveResult> {
        let f = self.forward(rho, true)?;
        let nx = self.grid.n_x();
        let times = self.grid.times();
        let xs = self.grid.xs();
        let mut values = vec![0.0; self.grid.len()];
        for i in 1..self.k0 {
            for (v, &x) in values[i * nx..(i + 1) * nx].iter_mut().zip(&xs) {
                *v = density_nu(self.nu, times[i], x);
            }
        }
        for (r, row) in f.rows.iter().enumerate() {
            let i = self.k0 + r;
            values[i * nx..(i + 1) * nx].copy_from_slice(row);
        }
        // Past 2 − t0 the field keeps stepping; W(2,0) itself comes from the
        // end layer.
        let mut z = f.rows.last().cloned().unwrap_or_default();
        let mut scratch = vec![0.0; nx];
        for k in self.k1..times.len() - 1 {
            self.step(k, &f.sample, &mut z, &mut scratch);
            values[(k + 1) * nx..(k + 2) * nx].copy_from_slice(&z);
        }
        let z_field = ScalarField::from_values(&self.grid, values)?;
        let diagnostics = self.diagnostics(&f);
        Ok(PotentialSolveResult {
            z_field,
            t0: self.t0(),
            z_end: f.z_end,
            z_free_end: self.z_free,
            diagnostics,
            hscale: self.hscale,
            first_row: self.k0,
        })
    }

    /// The diagnostics of a solve without the field.
    pub fn diagnose<P: Potential + ?Sized>(&self, rho: &P) -> Result<Diagnostics> {
        Ok(self.diagnostics(&self.forward(rho, false)?))
    }

    fn diagnostics(&self, f: &Forward<'_>) -> Diagnostics {
        let nx = self.grid.n_x();
        let s = &f.sample;
        let peak = s.max_abs();
        let edge = (0..self.grid.n_t()).map(|i| s.get(i, 0).abs().max(s.get(i, nx - 1).abs())).fold(0.0, f64::max);
        let flux = f.flux / self.z_free;
        Diagnostics {
            boundary_flux: flux,
            boundary_warning: flux > BOUNDARY_WARNING,
            negative_nodes: f.negative_nodes,
            support_clipped: peak > 0.0 && edge > 1e-10 * peak,
        }
    }

    /// h(ρ;2,0) and its functional gradient G(s,y) = δh/δρ(s,y).
    ///
    /// Between the layers G is the exact derivative of the discrete scheme,
    /// divided by the trapezoid cell area, so ∬G·χ equals the directional
    /// derivative of the computed h for χ supported there. Inside the layers
    /// G is the derivative of the bridge average. Rows t = 0 and t = 2 carry
    /// point masses at x = 0 and are left at zero.
    pub fn gradient<P: Potential + ?Sized>(&self, rho: &P) -> Result<GradientResult> {
        let f = self.forward(rho, true)?;
        let nx = self.grid.n_x();
        let nt = self.grid.n_t();
        let dx = self.grid.dx();
        let c = self.coupling;
        let mut g = vec![0.0; nt * nx];
        let mut adj = f.end_weights.clone();
        let mut scratch = vec![0.0; nx];
        let mut u = vec![0.0; nx];
        for k in (self.k0..self.k1).rev() {
            let step = &self.steps[k - self.k0];
            u.copy_from_slice(&f.rows[k - self.k0]);
            step.heat(&mut u, &mut scratch);
            step.heat(&mut adj, &mut scratch);
            let (ra, rb) = (f.sample.row(k), f.sample.row(k + 1));
            for j in 0..nx {
                let e = (c * step.dt * 0.5 * (ra[j] + rb[j])).exp();
                let d = 0.5 * c * step.dt * e * u[j] * adj[j];
                g[k * nx + j] += d;
                g[(k + 1) * nx + j] += d;
                adj[j] *= e;
            }
            step.heat(&mut adj, &mut scratch);
        }
        let z = f.z_end;
        let norm = 1.0 / (z * self.hscale);
        let times = self.grid.times();
        let tw = self.grid.time_weights();
        for i in self.k0..=self.k1 {
            let area = if i == self.k0 {
                0.5 * (times[i + 1] - times[i])
            } else if i == self.k1 {
                0.5 * (times[i] - times[i - 1])
            } else {
                tw[i]
            } * dx;
            for v in &mut g[i * nx..(i + 1) * nx] {
                *v *= norm / area;
            }
        }
        // Layers: δZ_end = c Σ_y m_y δD(y), δD(y)/δρ(u,x) = bridge density.
        let first = &f.rows[0];
        let last_row = &f.rows[self.k1 - self.k0];
        let m_start: Vec<f64> = adj.iter().zip(first).map(|(a, z)| a * z).collect();
        let m_end: Vec<f64> = f.end_weights.iter().zip(last_row).map(|(w, z)| w * z).collect();
        for i in 1..self.k0 {
            let out = &mut g[i * nx..(i + 1) * nx];
            self.deposit(&m_start, times[i], out);
            out.iter_mut().for_each(|v| *v *= c * norm);
        }
        for i in self.k1 + 1..nt - 1 {
            let out = &mut g[i * nx..(i + 1) * nx];
            self.deposit(&m_end, HORIZON - times[i], out);
            out.iter_mut().for_each(|v| *v *= c * norm);
        }
        Ok(GradientResult {
            h: (z / self.z_free).ln() / self.hscale,
            ratio: z / self.z_free,
            field: ScalarField::from_values(&self.grid, g)?,
        })
    }

    // out(x) = Σ_y m_y q_u(x; y), q_u the bridge density at time u of a
    // bridge from 0 at time 0 to y at time t0 (and mirrored for the end).
    fn deposit(&self, mass: &[f64], u: f64, out: &mut [f64]) {
        let t0 = self.t0();
        let dx = self.grid.dx();
        let l = self.grid.half_width();
        let n = out.len();
        let sigma = (self.nu * u * (t0 - u) / t0).max(0.0).sqrt();
        let mut w = Vec::new();
        for (j, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let mean = self.grid.x(j) * u / t0;
            let pos = (mean + l) / dx;
            if sigma < dx {
                let jl = (pos.floor().max(0.0) as usize).min(n - 2);
                let f = (pos - jl as f64).clamp(0.0, 1.0);
                out[jl] += m * (1.0 - f) / dx;
                out[jl + 1] += m * f / dx;
                continue;
            }
            let half = 8.0 * sigma / dx;
            let lo = (pos - half).floor().max(0.0) as usize;
            let hi = ((pos + half).ceil() as usize).min(n - 1);
            w.clear();
            w.extend((lo..=hi).map(|i| {
                let d = (i as f64 - pos) * dx / sigma;
                (-0.5 * d * d).exp()
            }));
            let total: f64 = w.iter().sum::<f64>() * dx;
            for (o, wi) in out[lo..=hi].iter_mut().zip(&w) {
                *o += m * wi / total;
            }
        }
    }

    // D(y) for every node y: ∫₀^{t0} E[ρ(s(u), y·u/t0 + σ_u ξ)] du with
    // s(u) = u at the start and s(u) = 2 − u at the end.
    fn layer_exponent<P: Potential + ?Sized>(&self, rho: &P, at_end: bool) -> Vec<f64> {
        let t0 = self.t0();
        let xs = self.grid.xs();
        let mut d = vec![0.0; xs.len()];
        let q = &self.layer;
        for (&frac, &wu) in q.frac.iter().zip(&q.weight) {
            let u = t0 * frac;
            let s = if at_end { HORIZON - u } else { u };
            let sigma = (self.nu * u * (1.0 - frac)).sqrt();
            let mean_rho = rho.smoothed_slice(s, sigma);
            for (dj, &x) in d.iter_mut().zip(&xs) {
                *dj += wu * mean_rho(x * frac);
            }
        }
        d
    }

    fn step(&self, k: usize, sample: &ScalarField, z: &mut [f64], scratch: &mut [f64]) {
        let step = &self.steps[k - self.k0];
        let c = self.coupling;
        step.heat(z, scratch);
        let (ra, rb) = (sample.row(k), sample.row(k + 1));
        for j in 0..z.len() {
            z[j] *= (c * step.dt * 0.5 * (ra[j] + rb[j])).exp();
        }
        step.heat(z, scratch);
    }

    fn forward<'a, P: Potential + ?Sized>(&self, rho: &'a P, keep: bool) -> Result<Forward<'a>> {
        let sample = rho.sample(&self.grid);
        if sample.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("potential is not finite on the grid"));
        }
        let c = self.coupling;
        let nx = self.grid.n_x();
        let dx = self.grid.dx();
        let start = self.layer_exponent(rho, false);
        let end = self.layer_exponent(rho, true);
        let mut z: Vec<f64> = self.kernel_t0.iter().zip(&start).map(|(p, d)| p * (c * d).exp()).collect();
        z[0] = 0.0;
        z[nx - 1] = 0.0;
        let mut rows = Vec::new();
        if keep {
            rows.reserve(self.k1 - self.k0 + 1);
            rows.push(z.clone());
        }
        let mut scratch = vec![0.0; nx];
        let mut negative = 0;
        let mut flux = 0.0;
        for k in self.k0..self.k1 {
            self.step(k, &sample, &mut z, &mut scratch);
            negative += z.iter().filter(|&&v| v < 0.0).count();
            flux += self.steps[k - self.k0].dt * 0.5 * self.nu * (z[1].abs() + z[nx - 2].abs()) / dx;
            if keep {
                rows.push(z.clone());
            }
        }
        let mut end_weights: Vec<f64> = self.kernel_t0.iter().zip(&end).map(|(p, d)| dx * p * (c * d).exp()).collect();
        end_weights[0] = 0.0;
        end_weights[nx - 1] = 0.0;
        let terms: Vec<f64> = z.iter().zip(&end_weights).map(|(a, b)| a * b).collect();
        let z_end = pairwise_sum(&terms);
        if !(z_end > 0.0 && z_end.is_finite()) {
            return Err(Error::numeric(format!("W(2,0) = {z_end} is not a positive finite number")));
        }
        Ok(Forward { sample, rows, end_weights, z_end, negative_nodes: negative, flux })
    }
}

/// Forward solve with the unscaled equation.
pub fn solve_forward<P: Potential + ?Sized>(rho: &P, cfg: &SolverConfig) -> Result<PotentialSolveResult> {
    HeatPotentialSolver::standard(cfg)?.solve(rho)
}

/// h_λ(ρ;2,0) from the λ-scaled equation.
pub fn scaled_h<P: Potential + ?Sized>(rho: &P, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    HeatPotentialSolver::scaled(cfg, lambda)?.h(rho)
}

/// δh(ρ;2,0)/δρ for the unscaled equation.
pub fn gradient_h<P: Potential + ?Sized>(rho: &P, cfg: &SolverConfig) -> Result<GradientResult> {
    HeatPotentialSolver::standard(cfg)?.gradient(rho)
}
