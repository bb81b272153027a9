//! Space-time grids over [0,2] × [−L,L], scalar fields on them and the
//! `Potential` abstraction used by every solver.

use crate::error::{Error, Result};
use crate::quad::{pairwise_sum, trapezoid_weights};
use std::borrow::Cow;
use std::io::{BufRead, Read, Write};
use std::sync::OnceLock;

/// Final time of every problem in this crate.
pub const HORIZON: f64 = 2.0;

/// Placement of the time nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeAxis {
    Uniform,
    /// Symmetric power grading: with v = 2i/(n−1) − 1 the node is
    /// t = 1 + sgn(v)(1 − (1−|v|)^p), so spacing shrinks like τ^{1−1/p}
    /// at distance τ from either end.
    Graded(u32),
}

impl TimeAxis {
    fn code(self) -> u32 {
        match self {
            TimeAxis::Uniform => 0,
            TimeAxis::Graded(p) => p,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            0 | 1 => Ok(TimeAxis::Uniform),
            p if p <= 8 => Ok(TimeAxis::Graded(p)),
            p => Err(Error::parse(format!("unsupported time grading {p}"))),
        }
    }

    fn label(self) -> String {
        match self {
            TimeAxis::Uniform => "uniform".into(),
            TimeAxis::Graded(p) => format!("graded:{p}"),
        }
    }

    fn parse_label(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(TimeAxis::Uniform);
        }
        s.strip_prefix("graded:")
            .and_then(|p| p.parse::<u32>().ok())
            .ok_or_else(|| Error::parse(format!("bad time axis label {s:?}")))
            .and_then(TimeAxis::from_code)
    }
}

fn build_times(n_t: usize, axis: TimeAxis) -> Vec<f64> {
    let last = n_t - 1;
    let mut times = vec![0.0; n_t];
    for (i, t) in times.iter_mut().enumerate().take(last / 2 + 1) {
        let u = i as f64 / last as f64;
        *t = match axis {
            TimeAxis::Uniform => HORIZON * u,
            TimeAxis::Graded(p) => (2.0 * u).powi(p as i32),
        };
    }
    for i in last / 2 + 1..n_t {
        times[i] = HORIZON - times[last - i];
    }
    if last % 2 == 0 {
        times[last / 2] = 1.0;
    }
    times
}

/// Tensor grid with `n_t` time nodes on [0,2] and `n_x` uniform space nodes
/// on [−L, L]. `n_x` is odd so x = 0 is a node.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    n_x: usize,
    half_width: f64,
    axis: TimeAxis,
    times: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn new(n_t: usize, n_x: usize, half_width: f64, axis: TimeAxis) -> Result<Self> {
        if n_t < 3 || n_t % 2 == 0 {
            return Err(Error::config(format!("n_t must be odd and ≥ 3, got {n_t}")));
        }
        if n_x < 3 || n_x % 2 == 0 {
            return Err(Error::config(format!("n_x must be odd and ≥ 3, got {n_x}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config(format!("L must be positive, got {half_width}")));
        }
        if let TimeAxis::Graded(p) = axis {
            if !(1..=8).contains(&p) {
                return Err(Error::config(format!("grading power must be in 1..=8, got {p}")));
            }
        }
        Ok(SpaceTimeGrid { n_x, half_width, axis, times: build_times(n_t, axis) })
    }

    pub fn uniform(n_t: usize, n_x: usize, half_width: f64) -> Result<Self> {
        Self::new(n_t, n_x, half_width, TimeAxis::Uniform)
    }

    pub fn n_t(&self) -> usize {
        self.times.len()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn axis(&self) -> TimeAxis {
        self.axis
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n_x - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    pub fn origin(&self) -> usize {
        self.n_x / 2
    }

    pub fn len(&self) -> usize {
        self.n_t() * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Trapezoid weights in time.
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times)
    }

    /// Index of the node equal to `t` (to 1e−12), if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - 1e-12);
        (i < self.n_t() && (self.times[i] - t).abs() <= 1e-12).then_some(i)
    }

    /// Interval `k` with times[k] ≤ t ≤ times[k+1] and the fraction along it.
    pub fn locate_time(&self, t: f64) -> Option<(usize, f64)> {
        if !(0.0..=HORIZON).contains(&t) {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.n_t() - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        Some((k, ((t - self.times[k]) / h).clamp(0.0, 1.0)))
    }
}

/// Real values on a `SpaceTimeGrid`, row-major with time outer.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!("field has {} values, grid needs {}", values.len(), grid.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("field values must be finite, found {v}")));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.xs();
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.times() {
            values.extend(xs.iter().map(|&x| f(t, x)));
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_x;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.n_x;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_x + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::config("fields live on different grids"));
        }
        Ok(())
    }

    /// ∬ f g dx dt by the trapezoid rule in both directions.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.weighted_sum(|i| self.row(i).iter().zip(other.row(i)).map(|(a, b)| a * b)))
    }

    /// ∬ f dx dt.
    pub fn integral(&self) -> f64 {
        self.weighted_sum(|i| self.row(i).iter().copied())
    }

    /// ∬ f² dx dt.
    pub fn norm_sq(&self) -> f64 {
        self.weighted_sum(|i| self.row(i).iter().map(|v| v * v))
    }

    fn weighted_sum<I: Iterator<Item = f64>>(&self, row: impl Fn(usize) -> I) -> f64 {
        let wt = self.grid.time_weights();
        let dx = self.grid.dx();
        let per_row: Vec<f64> = (0..self.grid.n_t())
            .map(|i| {
                let v: Vec<f64> = row(i).collect();
                let n = v.len();
                wt[i] * dx * (pairwise_sum(&v) - 0.5 * (v[0] + v[n - 1]))
            })
            .collect();
        pairwise_sum(&per_row)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Linear interpolation of row `i` at `x`; zero outside [−L, L].
    pub fn interp_row(&self, i: usize, x: f64) -> f64 {
        let l = self.grid.half_width;
        if !(x >= -l && x <= l) {
            return 0.0;
        }
        let dx = self.grid.dx();
        let pos = (x + l) / dx;
        let near = pos.round();
        if (pos - near).abs() < 1e-9 {
            return self.row(i)[near as usize];
        }
        let j = (pos.floor() as usize).min(self.grid.n_x - 2);
        let f = pos - j as f64;
        let r = self.row(i);
        r[j] + f * (r[j + 1] - r[j])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# kpz-ldp field v1 axis={} n_t={} n_x={} L={}",
            self.grid.axis.label(),
            self.grid.n_t(),
            self.grid.n_x,
            self.grid.half_width
        )?;
        writeln!(w, "t,x,value")?;
        let xs = self.grid.xs();
        for (i, &t) in self.grid.times.iter().enumerate() {
            for (j, &x) in xs.iter().enumerate() {
                writeln!(w, "{t},{x},{}", self.get(i, j))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut axis = None;
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                for tok in c.split_whitespace() {
                    if let Some(a) = tok.strip_prefix("axis=") {
                        axis = Some(TimeAxis::parse_label(a)?);
                    }
                }
                continue;
            }
            if line.starts_with("t,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::parse(format!("expected t,x,value, got {line:?}")));
            }
            let p = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::parse(format!("{s:?}: {e}")));
            rows.push((p(parts[0])?, p(parts[1])?, p(parts[2])?));
        }
        let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        times.dedup();
        let n_t = times.len();
        if n_t == 0 || rows.len() % n_t != 0 {
            return Err(Error::parse("ragged field data"));
        }
        let n_x = rows.len() / n_t;
        let half_width = -rows[0].1;
        let grid = SpaceTimeGrid::new(n_t, n_x, half_width, axis.unwrap_or(TimeAxis::Uniform))?;
        let tol = 1e-9 * (1.0 + half_width);
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / n_x, k % n_x);
            if (r.0 - grid.times[i]).abs() > 1e-9 || (r.1 - grid.x(j)).abs() > tol {
                return Err(Error::parse(format!("node ({}, {}) does not match the grid", r.0, r.1)));
            }
        }
        ScalarField::from_values(&grid, rows.into_iter().map(|r| r.2).collect())
    }

    /// Binary layout: `KPZF`, u32 time-axis code, u32 n_t, u32 n_x, f64 L,
    /// then the values; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"KPZF")?;
        w.write_all(&self.grid.axis.code().to_le_bytes())?;
        w.write_all(&(self.grid.n_t() as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n_x as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if &head[..4] != b"KPZF" {
            return Err(Error::parse("missing KPZF magic"));
        }
        let u = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap());
        let axis = TimeAxis::from_code(u(4))?;
        let half_width = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let grid = SpaceTimeGrid::new(u(8) as usize, u(12) as usize, half_width, axis)?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes)?;
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        ScalarField::from_values(&grid, values)
    }
}

/// A function on a time slice, x ↦ f(t, x).
pub type Slice<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

fn smoothing_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let z: Vec<f64> = (-128..=128).map(|i| i as f64 / 16.0).collect();
        let mut w: Vec<f64> = z.iter().map(|z| (-0.5 * z * z).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        (z, w)
    })
}

/// A deviation field ρ(t,x) that can be queried off-grid.
pub trait Potential: Sync {
    fn value(&self, t: f64, x: f64) -> f64;

    /// The slice at time `t`; implementations hoist per-time work here.
    fn slice(&self, t: f64) -> Slice<'_> {
        Box::new(move |x| self.value(t, x))
    }

    /// x ↦ E[ρ(t, x + σξ)] for standard normal ξ. The default applies the
    /// trapezoid rule in ξ on [−8, 8] with step 1/16.
    fn smoothed_slice(&self, t: f64, sigma: f64) -> Slice<'_> {
        let f = self.slice(t);
        if sigma <= 0.0 {
            return f;
        }
        let (z, w) = smoothing_rule();
        Box::new(move |x| z.iter().zip(w).map(|(z, w)| w * f(x + sigma * z)).sum())
    }

    /// Node values on `grid`.
    fn sample(&self, grid: &SpaceTimeGrid) -> Cow<'_, ScalarField> {
        let xs = grid.xs();
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.times() {
            let f = self.slice(t);
            values.extend(xs.iter().map(|&x| f(x)));
        }
        Cow::Owned(ScalarField { grid: grid.clone(), values })
    }
}

/// Bilinear interpolation; zero outside the grid.
impl Potential for ScalarField {
    fn value(&self, t: f64, x: f64) -> f64 {
        match self.grid.locate_time(t) {
            Some((k, f)) => (1.0 - f) * self.interp_row(k, x) + f * self.interp_row(k + 1, x),
            None => 0.0,
        }
    }

    fn slice(&self, t: f64) -> Slice<'_> {
        match self.grid.locate_time(t) {
            Some((k, f)) => Box::new(move |x| (1.0 - f) * self.interp_row(k, x) + f * self.interp_row(k + 1, x)),
            None => Box::new(|_| 0.0),
        }
    }

    fn sample(&self, grid: &SpaceTimeGrid) -> Cow<'_, ScalarField> {
        if *grid == self.grid {
            Cow::Borrowed(self)
        } else {
            let xs = grid.xs();
            let mut values = Vec::with_capacity(grid.len());
            for &t in grid.times() {
                let f = Potential::slice(self, t);
                values.extend(xs.iter().map(|&x| f(x)));
            }
            Cow::Owned(ScalarField { grid: grid.clone(), values })
        }
    }
}

/// ρ ≡ c on the box [0,2] × [−L, L], zero outside.
#[derive(Clone, Copy, Debug)]
pub struct ConstantBox {
    pub value: f64,
    pub half_width: f64,
}

impl Potential for ConstantBox {
    fn value(&self, t: f64, x: f64) -> f64 {
        if (0.0..=HORIZON).contains(&t) && x.abs() <= self.half_width {
            self.value
        } else {
            0.0
        }
    }
}

/// Any closure (t, x) ↦ ρ as a potential.
pub struct FnPotential<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> Potential for FnPotential<F> {
    fn value(&self, t: f64, x: f64) -> f64 {
        (self.0)(t, x)
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn value(&self, t: f64, x: f64) -> f64 {
        (**self).value(t, x)
    }

    fn slice(&self, t: f64) -> Slice<'_> {
        (**self).slice(t)
    }

    fn smoothed_slice(&self, t: f64, sigma: f64) -> Slice<'_> {
        (**self).smoothed_slice(t, sigma)
    }

    fn sample(&self, grid: &SpaceTimeGrid) -> Cow<'_, ScalarField> {
        (**self).sample(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_axis_is_symmetric() {
        let g = SpaceTimeGrid::new(65, 5, 1.0, TimeAxis::Graded(3)).unwrap();
        let t = g.times();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[64], 2.0);
        assert_eq!(t[32], 1.0);
        for i in 0..65 {
            assert_eq!(t[i] + t[64 - i], 2.0);
        }
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_even_sizes() {
        assert!(SpaceTimeGrid::uniform(4, 5, 1.0).is_err());
        assert!(SpaceTimeGrid::uniform(5, 4, 1.0).is_err());
        assert!(SpaceTimeGrid::uniform(5, 5, 0.0).is_err());
    }

    #[test]
    fn bilinear_reproduces_linear_functions() {
        let g = SpaceTimeGrid::new(17, 21, 2.0, TimeAxis::Graded(2)).unwrap();
        let f = ScalarField::from_fn(&g, |t, x| 1.0 + 2.0 * t - 0.5 * x);
        let v = f.value(0.77, 0.31);
        assert!((v - (1.0 + 1.54 - 0.155)).abs() < 1e-12);
        assert_eq!(f.value(0.5, 3.0), 0.0);
    }
}
