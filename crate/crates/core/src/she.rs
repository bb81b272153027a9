//! Small-noise stochastic heat equation ∂_t Z = ½∂_xx Z + √ε ξ Z from the
//! narrow wedge, with Girsanov tilting toward a deviation field.
//!
//! The delta datum is replaced by the exact kernel p(t0,·). Each step applies
//! the heat semigroup exactly on the grid (convolution with the normalized
//! sampled Gaussian, which keeps Z positive) and then the noise factor
//! 1 + √ε·W/Δx + φΔt, where W ~ N(0, ΔtΔx) is the white-noise mass of a cell.
//! Under the tilt the log-weight −ε^{−1/2}Σφ·W − (2ε)^{−1}Σφ²ΔtΔx makes
//! weighted averages unbiased for the untilted law.

use crate::deviation::{InstantonProfile, ScalingConvention};
use crate::error::{Error, Result};
use crate::grid::{Potential, HORIZON};
use crate::heat_kernel::density;
use crate::optimizer::{ProductKernelField, Tail};
use crate::quad::pairwise_sum;
use crate::stats::{effective_sample_size, McEstimate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Below this effective sample size an estimate is flagged.
pub const MIN_ESS: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dx: f64,
    pub t0: f64,
    pub dt: f64,
}

impl Default for SheConfig {
    fn default() -> Self {
        SheConfig { half_width: 5.0, dx: 0.05, t0: 1.0 / 16.0, dt: 1.0 / 128.0 }
    }
}

impl SheConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.half_width) && ok(self.dx) && ok(self.t0) && ok(self.dt)) {
            return Err(Error::config("SHE grid parameters must be positive"));
        }
        if self.t0 >= HORIZON {
            return Err(Error::config(format!("t0 must be below 2, got {}", self.t0)));
        }
        if self.half_width < 3.5 * HORIZON.sqrt() {
            return Err(Error::config(format!("L = {} truncates the kernel at t = 2", self.half_width)));
        }
        // The sampled Gaussian must stay a faithful heat step.
        if self.dt.sqrt() < self.dx {
            return Err(Error::config(format!("need √Δt ≥ Δx, got Δt = {}, Δx = {}", self.dt, self.dx)));
        }
        Ok(())
    }

    pub fn n_x(&self) -> usize {
        2 * (self.half_width / self.dx).round() as usize + 1
    }

    pub fn n_steps(&self) -> usize {
        ((HORIZON - self.t0) / self.dt).round().max(1.0) as usize
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - (self.n_x() / 2) as f64) * self.dx
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v: f64 = parse_real(value).map_err(|e| Error::parse(format!("{key} = {value:?}: {e}")))?;
        match key {
            "L" => self.half_width = v,
            "dx" => self.dx = v,
            "t0" => self.t0 = v,
            "dt" => self.dt = v,
            _ => return Err(Error::parse(format!("unknown SHE key {key:?}"))),
        }
        Ok(())
    }
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|e| format!("{e}")),
    }
}

/// One realization at t = 2.
#[derive(Clone, Debug)]
pub struct SheSample {
    /// Z_ε(2, x_j) on the configured grid.
    pub z_end: Vec<f64>,
    /// Z_ε(2, 0).
    pub z_center: f64,
    /// log dP/dQ of the realization; zero without a tilt.
    pub log_weight: f64,
    /// False once any node went nonpositive.
    pub valid: bool,
}

impl SheSample {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

struct Stepper {
    cfg: SheConfig,
    n_x: usize,
    taps: Vec<f64>,
    start: Vec<f64>,
    times: Vec<f64>,
}

impl Stepper {
    fn new(cfg: &SheConfig) -> Result<Self> {
        cfg.validate()?;
        let n_x = cfg.n_x();
        let half = (6.0 * cfg.dt.sqrt() / cfg.dx).ceil() as usize;
        let mut taps: Vec<f64> = (0..=2 * half).map(|k| density(cfg.dt, (k as f64 - half as f64) * cfg.dx)).collect();
        let total = pairwise_sum(&taps);
        taps.iter_mut().for_each(|v| *v /= total);
        let n = cfg.n_steps();
        let dt = (HORIZON - cfg.t0) / n as f64;
        let times = (0..n).map(|k| cfg.t0 + (k as f64 + 1.0) * dt).collect();
        let start = (0..n_x).map(|j| density(cfg.t0, cfg.x(j))).collect();
        let mut cfg = cfg.clone();
        cfg.dt = dt;
        Ok(Stepper { cfg, n_x, taps, start, times })
    }

    fn heat(&self, z: &[f64], out: &mut [f64]) {
        let half = self.taps.len() / 2;
        for (j, o) in out.iter_mut().enumerate() {
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(self.n_x - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                acc += self.taps[i + half - j] * z[i];
            }
            *o = acc;
        }
    }

    // Tilt values on grid nodes, one row per step, taken at mid-step.
    fn tilt_rows(&self, tilt: Option<&(dyn Potential + '_)>) -> Option<Vec<Vec<f64>>> {
        let tilt = tilt?;
        let dt = self.cfg.dt;
        Some(
            self.times
                .iter()
                .map(|&t| {
                    let f = tilt.slice(t - 0.5 * dt);
                    (0..self.n_x).map(|j| f(self.cfg.x(j))).collect()
                })
                .collect(),
        )
    }

    fn run(&self, eps: f64, tilt: Option<&[Vec<f64>]>, rng: &mut ChaCha8Rng) -> SheSample {
        let (dt, dx) = (self.cfg.dt, self.cfg.dx);
        let amp = (eps * dt / dx).sqrt();
        let cell = (dt * dx).sqrt();
        let mut z = self.start.clone();
        let mut tmp = vec![0.0; self.n_x];
        let mut log_weight = 0.0;
        let mut valid = true;
        for k in 0..self.times.len() {
            self.heat(&z, &mut tmp);
            let phi = tilt.map(|rows| rows[k].as_slice());
            let mut lw = 0.0;
            for j in 0..self.n_x {
                let n: f64 = StandardNormal.sample(rng);
                let mut factor = 1.0 + amp * n;
                if let Some(phi) = phi {
                    let p = phi[j];
                    factor += p * dt;
                    lw -= p * cell * n / eps.sqrt() + p * p * dt * dx / (2.0 * eps);
                }
                z[j] = tmp[j] * factor;
                valid &= z[j] > 0.0;
            }
            log_weight += lw;
        }
        let c = self.n_x / 2;
        SheSample { z_center: z[c], z_end: z, log_weight, valid }
    }
}

/// One sample of Z_ε(2,·) with its Girsanov log-weight. The draw depends only
/// on (`seed`, `index`).
pub fn simulate_she(
    eps: f64,
    tilt: Option<&dyn Potential>,
    seed: u64,
    index: u64,
    cfg: &SheConfig,
) -> Result<SheSample> {
    check_eps(eps)?;
    let stepper = Stepper::new(cfg)?;
    let rows = stepper.tilt_rows(tilt);
    let mut rng = rng_for(seed, index);
    Ok(stepper.run(eps, rows.as_deref(), &mut rng))
}

/// Samples `0..n` in parallel; sample i equals `simulate_she(.., seed, i, ..)`.
pub fn simulate_batch(
    eps: f64,
    tilt: Option<&dyn Potential>,
    n: usize,
    seed: u64,
    cfg: &SheConfig,
) -> Result<Vec<SheSample>> {
    check_eps(eps)?;
    let stepper = Stepper::new(cfg)?;
    let rows = stepper.tilt_rows(tilt);
    Ok((0..n as u64).into_par_iter().map(|i| stepper.run(eps, rows.as_deref(), &mut rng_for(seed, i))).collect())
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.2) {
        return Err(Error::domain(format!("ε must lie in (0, 0.2], got {eps}")));
    }
    Ok(())
}

/// Weighted mean of f over valid samples, with invalid ones dropped.
pub fn weighted_mean(samples: &[SheSample], f: impl Fn(&SheSample) -> f64) -> McEstimate {
    let v: Vec<f64> = samples.iter().filter(|s| s.valid).map(|s| s.weight() * f(s)).collect();
    McEstimate::from_samples(&v)
}

/// How the sampler is tilted.
#[derive(Clone, Debug)]
pub enum TiltPolicy {
    None,
    /// (ρ*)_λ for the lower tail at λ ≥ 2, the product-kernel field
    /// ±λ·2^{3/2}p(2−s,y)p(s,y) otherwise.
    Instanton,
    Field(crate::grid::ScalarField),
}

impl TiltPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            TiltPolicy::None => "none",
            TiltPolicy::Instanton => "instanton",
            TiltPolicy::Field(_) => "field",
        }
    }
}

/// The regime-matched tilt field for the event √(4π)Z(2,0) ≶ e^{∓λ}.
pub fn tilt_field(lambda: f64, tail: Tail) -> Result<Box<dyn Potential + Send>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("tilt needs λ > 0, got {lambda}")));
    }
    Ok(match tail {
        Tail::Lower if lambda >= 2.0 => Box::new(InstantonProfile::scaled(lambda, ScalingConvention::Standard)?),
        _ => Box::new(ProductKernelField { amplitude: tail.sign() * lambda }),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailEstimate {
    pub epsilon: f64,
    pub lambda: f64,
    pub tail: Tail,
    pub probability: McEstimate,
    /// −ε log(probability.mean).
    pub log_rate: f64,
    pub ess: f64,
    /// Samples dropped for a nonpositive node.
    pub invalid: usize,
    pub low_confidence: bool,
}

impl TailEstimate {
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.low_confidence {
            f.push("low_ess".to_string());
        }
        if self.invalid > 0 {
            f.push(format!("invalid={}", self.invalid));
        }
        if self.probability.mean == 0.0 {
            f.push("no_hits".to_string());
        }
        if f.is_empty() {
            "ok".to_string()
        } else {
            f.join(";")
        }
    }
}

pub const TAIL_CSV_HEADER: &str = "epsilon,lambda,tail,n,prob,stderr,log_rate,ess,flags";

pub fn write_tail_csv<W: Write>(mut w: W, rows: &[TailEstimate]) -> Result<()> {
    writeln!(w, "# kpz-ldp she-tail v1")?;
    writeln!(w, "{TAIL_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.10e},{:.10e},{:.10e},{:.3},{}",
            r.epsilon,
            r.lambda,
            r.tail,
            r.probability.samples,
            r.probability.mean,
            r.probability.stderr,
            r.log_rate,
            r.ess,
            r.flags()
        )?;
    }
    Ok(())
}

/// Reads what `write_tail_csv` writes. The flag column is recomputed from
/// the other fields, so only `low_ess` and `invalid=k` are recovered.
pub fn read_tail_csv<R: BufRead>(r: R) -> Result<Vec<TailEstimate>> {
    let mut out = Vec::new();
    let mut header = false;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != TAIL_CSV_HEADER {
                return Err(Error::parse(format!("line {}: expected header {TAIL_CSV_HEADER:?}", n + 1)));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::parse(format!("line {}: expected 9 fields, got {}", n + 1, f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| Error::parse(format!("line {}: {:?}: {e}", n + 1, f[k])));
        let samples = f[3].parse::<usize>().map_err(|e| Error::parse(format!("line {}: {e}", n + 1)))?;
        let invalid = f[8]
            .split(';')
            .find_map(|t| t.strip_prefix("invalid="))
            .map_or(Ok(0), |v| v.parse::<usize>())
            .map_err(|e| Error::parse(format!("line {}: {e}", n + 1)))?;
        out.push(TailEstimate {
            epsilon: num(0)?,
            lambda: num(1)?,
            tail: f[2].parse()?,
            probability: McEstimate { mean: num(4)?, stderr: num(5)?, samples },
            log_rate: num(6)?,
            ess: num(7)?,
            invalid,
            low_confidence: f[8].split(';').any(|t| t == "low_ess"),
        });
    }
    if !header {
        return Err(Error::parse("missing header"));
    }
    Ok(out)
}

/// Importance-sampled P[√(4π)Z_ε(2,0) ≤ e^{−λ}] (lower) or ≥ e^{λ} (upper).
pub fn estimate_tail(
    eps: f64,
    lambda: f64,
    tail: Tail,
    n_samples: usize,
    policy: &TiltPolicy,
    seed: u64,
    cfg: &SheConfig,
) -> Result<TailEstimate> {
    if n_samples < 1000 {
        return Err(Error::domain(format!("need at least 1000 samples, got {n_samples}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("λ must be nonnegative, got {lambda}")));
    }
    let boxed;
    let tilt: Option<&dyn Potential> = match policy {
        TiltPolicy::None => None,
        TiltPolicy::Field(f) => Some(f),
        TiltPolicy::Instanton if lambda == 0.0 => None,
        TiltPolicy::Instanton => {
            boxed = tilt_field(lambda, tail)?;
            Some(boxed.as_ref() as &dyn Potential)
        }
    };
    let samples = simulate_batch(eps, tilt, n_samples, seed, cfg)?;
    let scale = (4.0 * PI).sqrt();
    let level = (tail.sign() * lambda).exp();
    let hit = |s: &SheSample| {
        let v = scale * s.z_center;
        let inside = match tail {
            Tail::Lower => v <= level,
            Tail::Upper => v >= level,
        };
        if inside {
            1.0
        } else {
            0.0
        }
    };
    let invalid = samples.iter().filter(|s| !s.valid).count();
    let probability = weighted_mean(&samples, hit);
    let hits: Vec<f64> = samples.iter().filter(|s| s.valid).map(|s| s.weight() * hit(s)).collect();
    let ess = effective_sample_size(&hits);
    Ok(TailEstimate {
        epsilon: eps,
        lambda,
        tail,
        probability,
        log_rate: -eps * probability.mean.ln(),
        ess,
        invalid,
        low_confidence: ess < MIN_ESS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_step_preserves_mass_and_variance() {
        let s = Stepper::new(&SheConfig::default()).unwrap();
        let (m0, m2): (f64, f64) = s.taps.iter().enumerate().fold((0.0, 0.0), |(a, b), (k, w)| {
            let x = (k as f64 - (s.taps.len() / 2) as f64) * s.cfg.dx;
            (a + w, b + w * x * x)
        });
        assert!((m0 - 1.0).abs() < 1e-14);
        // Cutting the Gaussian at 6σ removes at most 12φ(6) of its variance.
        let deficit = 1.0 - m2 / s.cfg.dt;
        assert!((0.0..12.0 * (-18.0f64).exp() / (2.0 * PI).sqrt()).contains(&deficit), "{deficit:e}");
    }

    #[test]
    fn config_checks() {
        assert!(SheConfig::default().validate().is_ok());
        assert!(SheConfig { dx: 0.2, ..SheConfig::default() }.validate().is_err());
        assert!(SheConfig { half_width: 2.0, ..SheConfig::default() }.validate().is_err());
    }
}
