//! Zero-viscosity path problem: ℰ(γ;t,x) = ∫₀ᵗ ½γ'² − ρ*(s,γ(s)) ds over paths
//! from (0,0) to (t,x), its closed-form minimizers and a direct descent.

use crate::deviation::{ell, ell_derivative, integral_r_exact, solve_r};
use crate::error::{Error, Result};
use crate::grid::HORIZON;
use crate::quad::bisect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Default node count for returned paths.
pub const DEFAULT_NODES: usize = 1025;

/// Positions γ(s_i) on [0,t] with γ(0) = 0 and γ(t) = x.
///
/// Nodes are graded as τ ∝ w⁴ toward both ends, where ℓ'² and r grow like
/// τ^{−2/3}.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    times: Vec<f64>,
    positions: Vec<f64>,
}

const GRADING: i32 = 4;

/// Graded nodes on [0, t], symmetric about t/2.
pub fn graded_nodes(t: f64, n: usize) -> Vec<f64> {
    let last = n - 1;
    let mut s = vec![0.0; n];
    for (i, v) in s.iter_mut().enumerate() {
        let u = i as f64 / last as f64;
        let g = if u <= 0.5 { 0.5 * (2.0 * u).powi(GRADING) } else { 1.0 - 0.5 * (2.0 - 2.0 * u).powi(GRADING) };
        *v = t * g;
    }
    s[last] = t;
    s
}

impl DiscretePath {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() || times.len() < 2 {
            return Err(Error::domain("path needs matching times and positions, at least two"));
        }
        if times[0] != 0.0 || positions[0] != 0.0 {
            return Err(Error::domain("paths start at (0, 0)"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("path times must increase strictly"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("path positions must be finite"));
        }
        Ok(DiscretePath { times, positions })
    }

    /// Samples `f` on graded nodes over [0, t], pinning both endpoints.
    pub fn from_fn(t: f64, x: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(t > 0.0) {
            return Err(Error::domain("need t > 0 and at least two nodes"));
        }
        let times = graded_nodes(t, n);
        let mut positions: Vec<f64> = times.iter().map(|&s| f(s)).collect();
        positions[0] = 0.0;
        positions[n - 1] = x;
        Self::new(times, positions)
    }

    /// α·ℓ on [0, t].
    pub fn family_member(alpha: f64, t: f64, n: usize) -> Result<Self> {
        Self::from_fn(t, alpha * ell(t), n, |s| alpha * ell(s))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_point(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation at time s.
    pub fn at(&self, s: f64) -> f64 {
        let k = self.times.partition_point(|&v| v <= s).clamp(1, self.len() - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        let f = ((s - self.times[k]) / h).clamp(0.0, 1.0);
        self.positions[k] + f * (self.positions[k + 1] - self.positions[k])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# kpz-ldp path v1")?;
        writeln!(w, "s,gamma")?;
        for (s, g) in self.times.iter().zip(&self.positions) {
            writeln!(w, "{s},{g}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut positions = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("s,") {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::parse(format!("expected s,gamma, got {line:?}")))?;
            let p = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::parse(format!("{s:?}: {e}")));
            times.push(p(a)?);
            positions.push(p(b)?);
        }
        Self::new(times, positions)
    }
}

// Midpoint data of a fixed time mesh, reused across energy evaluations.
struct Mesh {
    h: Vec<f64>,
    r_mid: Vec<f64>,
    // ∫ r over each cell, exact.
    r_cell: Vec<f64>,
}

impl Mesh {
    fn new(times: &[f64]) -> Self {
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let r_mid = times
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                if m > 0.0 && m < HORIZON {
                    solve_r(m).unwrap_or(f64::INFINITY)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let r_cell =
            times.windows(2).map(|w| integral_r_exact(w[0].min(HORIZON), w[1].min(HORIZON)).unwrap_or(0.0)).collect();
        Mesh { h, r_mid, r_cell }
    }

    // ∫_cell −ρ* ≈ (∫_cell r)/(2π)·(1 − y²r²)₊ with r, y at the midpoint.
    fn cell_potential(&self, i: usize, y: f64) -> f64 {
        let r = self.r_mid[i];
        if !r.is_finite() {
            return 0.0;
        }
        let q = 1.0 - (y * r) * (y * r);
        if q > 0.0 {
            self.r_cell[i] / (2.0 * PI) * q
        } else {
            0.0
        }
    }

    fn energy(&self, g: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.h.len() {
            let d = g[i + 1] - g[i];
            let mid = 0.5 * (g[i] + g[i + 1]);
            e += 0.5 * d * d / self.h[i] + self.cell_potential(i, mid);
        }
        e
    }

    // Gradient with respect to interior nodes 1..n−1 (entries 0 and n−1 unused).
    fn gradient(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.h.len() {
            let d = (g[i + 1] - g[i]) / self.h[i];
            let mid = 0.5 * (g[i] + g[i + 1]);
            let r = self.r_mid[i];
            let dv = if r.is_finite() && (mid * r).abs() < 1.0 { -self.r_cell[i] * r * r * mid / PI } else { 0.0 };
            let pot = 0.5 * dv;
            out[i] += -d + pot;
            out[i + 1] += d + pot;
        }
    }

    // Solves K v = b for the stiffness matrix of ½∫γ'² on interior nodes.
    fn solve_stiffness(&self, b: &[f64], v: &mut [f64]) {
        let n = b.len();
        let m = n - 2;
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            let diag = 1.0 / self.h[i - 1] + 1.0 / self.h[i];
            let lower = if k > 0 { -1.0 / self.h[i - 1] } else { 0.0 };
            let upper = -1.0 / self.h[i];
            let denom = diag - lower * if k > 0 { c[k - 1] } else { 0.0 };
            c[k] = upper / denom;
            d[k] = (b[i] - lower * if k > 0 { d[k - 1] } else { 0.0 }) / denom;
        }
        v[0] = 0.0;
        v[n - 1] = 0.0;
        for k in (0..m).rev() {
            v[k + 1] = d[k] - if k + 1 < m { c[k] * v[k + 2] } else { 0.0 };
        }
    }
}

/// ℰ(γ) for the piecewise-linear path. The kinetic part is exact; the
/// potential part uses product integration, the exact cell integral of r
/// times the profile factor at the cell midpoint.
pub fn path_energy(path: &DiscretePath) -> f64 {
    Mesh::new(&path.times).energy(&path.positions)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classification {
    /// (2,0): every αℓ with |α| ≤ 1 is optimal; the α = 0 member is returned.
    InteriorFamily { alpha: f64 },
    /// Inside Ω: the unique geodesic is αℓ with α = x/ℓ(t).
    InteriorUnique { alpha: f64 },
    /// Outside Ω: ±ℓ on [0, t_*], then the tangent line.
    Tangent { t_star: f64 },
}

#[derive(Clone, Debug)]
pub struct GeodesicResult {
    pub path: DiscretePath,
    /// Continuum energy of the closed-form path.
    pub energy: f64,
    pub classification: Classification,
    pub nonunique: bool,
}

/// The closed-form geodesic ending at (t, x).
pub fn geodesic(t: f64, x: f64) -> Result<GeodesicResult> {
    geodesic_with(t, x, DEFAULT_NODES)
}

pub fn geodesic_with(t: f64, x: f64, n_nodes: usize) -> Result<GeodesicResult> {
    if !(t > 0.0 && t <= HORIZON) || !x.is_finite() {
        return Err(Error::domain(format!("geodesic needs t ∈ (0,2] and finite x, got ({t}, {x})")));
    }
    if t == HORIZON && x == 0.0 {
        return Ok(GeodesicResult {
            path: DiscretePath::family_member(0.0, t, n_nodes)?,
            energy: family_energy(0.0, t)?,
            classification: Classification::InteriorFamily { alpha: 0.0 },
            nonunique: true,
        });
    }
    let l = ell(t);
    if t < HORIZON && x.abs() <= l {
        let alpha = x / l;
        return Ok(GeodesicResult {
            path: DiscretePath::from_fn(t, x, n_nodes, |s| alpha * ell(s))?,
            energy: family_energy(alpha, t)?,
            classification: Classification::InteriorUnique { alpha },
            nonunique: false,
        });
    }
    let t_star = tangency_time(t, x)?;
    let sign = x.signum();
    let l_star = ell(t_star);
    let slope = (x - sign * l_star) / (t - t_star);
    let path = DiscretePath::from_fn(t, x, n_nodes, |s| {
        if s <= t_star {
            sign * ell(s)
        } else {
            sign * l_star + slope * (s - t_star)
        }
    })?;
    // ½∫ℓ'² = (1/π)∫(r − π/2) on the boundary arc, where ρ* vanishes.
    let arc = (integral_r_exact(0.0, t_star)? - 0.5 * PI * t_star) / PI;
    Ok(GeodesicResult {
        path,
        energy: arc + 0.5 * slope * slope * (t - t_star),
        classification: Classification::Tangent { t_star },
        nonunique: false,
    })
}

/// ℰ(αℓ; t, αℓ(t)) = (α²/π)(R − πt/2) + (1−α²)R/(2π), R = ∫₀ᵗ r.
pub fn family_energy(alpha: f64, t: f64) -> Result<f64> {
    let big_r = integral_r_exact(0.0, t)?;
    let a2 = alpha * alpha;
    Ok(a2 / PI * (big_r - 0.5 * PI * t) + (1.0 - a2) * big_r / (2.0 * PI))
}

/// Root of ℓ(s) + ℓ'(s)(t − s) = |x| on (0, t).
pub fn tangency_time(t: f64, x: f64) -> Result<f64> {
    let ax = x.abs();
    let g = |s: f64| ell(s) + ell_derivative(s).unwrap_or(f64::NAN) * (t - s) - ax;
    let lo = 1e-14 * t;
    let hi = t * (1.0 - 1e-14);
    bisect(g, lo, hi, 1e-15 * t).map_err(|e| Error::numeric(format!("tangency at ({t}, {x}): {e}")))
}

/// h*(t, x) = −inf ℰ(·; t, x).
pub fn h_star(t: f64, x: f64) -> Result<f64> {
    Ok(-geodesic(t, x)?.energy)
}

/// Outcome of `direct_minimize`.
#[derive(Clone, Debug)]
pub struct DescentResult {
    pub path: DiscretePath,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Descent on the discrete energy from a seeded start: the straight line plus
/// a sinusoid whose amplitude and sign come from `seed`.
pub fn direct_minimize(t: f64, x: f64, n_nodes: usize, iterations: usize, seed: u64) -> Result<DescentResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp: f64 = rng.random_range(0.05..0.3) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let start = initial_path(t, x, n_nodes, amp)?;
    direct_minimize_from(&start, iterations)
}

/// Straight line 0 → x plus amp·sin(πs/t).
pub fn initial_path(t: f64, x: f64, n_nodes: usize, amp: f64) -> Result<DiscretePath> {
    if n_nodes < 16 {
        return Err(Error::domain(format!("direct_minimize needs ≥ 16 nodes, got {n_nodes}")));
    }
    if !(t > 0.0 && t <= HORIZON) || !x.is_finite() {
        return Err(Error::domain(format!("need t ∈ (0,2] and finite x, got ({t}, {x})")));
    }
    DiscretePath::from_fn(t, x, n_nodes, |s| x * s / t + amp * (PI * s / t).sin())
}

/// Sobolev-preconditioned gradient descent with Armijo backtracking.
pub fn direct_minimize_from(start: &DiscretePath, iterations: usize) -> Result<DescentResult> {
    let mesh = Mesh::new(&start.times);
    let n = start.len();
    let mut g = start.positions.clone();
    let mut e = mesh.energy(&g);
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut converged = false;
    let mut it = 0;
    while it < iterations {
        it += 1;
        mesh.gradient(&g, &mut grad);
        grad[0] = 0.0;
        grad[n - 1] = 0.0;
        mesh.solve_stiffness(&grad, &mut dir);
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope <= 1e-26 * (1.0 + e) {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            for k in 0..n {
                trial[k] = g[k] - step * dir[k];
            }
            let et = mesh.energy(&trial);
            if et <= e - 1e-4 * step * slope {
                std::mem::swap(&mut g, &mut trial);
                let drop = e - et;
                e = et;
                accepted = true;
                if drop <= 1e-15 * (1.0 + e) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    Ok(DescentResult { path: DiscretePath::new(start.times.clone(), g)?, energy: e, iterations: it, converged })
}

/// Closest member αℓ, |α| ≤ 1, in the sup norm on the path's nodes.
pub fn family_distance(path: &DiscretePath) -> (f64, f64) {
    let ls: Vec<f64> = path.times.iter().map(|&s| ell(s)).collect();
    let dist = |a: f64| path.positions.iter().zip(&ls).fold(0.0f64, |m, (g, l)| m.max((g - a * l).abs()));
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if dist(m1) <= dist(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let a = 0.5 * (lo + hi);
    (a, dist(a))
}
