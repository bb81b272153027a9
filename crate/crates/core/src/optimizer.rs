//! Minimal-energy deviations: min ½‖ρ‖² subject to h(ρ;2,0) = ±λ, and the
//! λ-scaled deep-tail problem with h_λ(ρ;2,0) = −1.
//!
//! Stationarity reads ρ = μG(ρ) with G = δh/δρ > 0. For a fixed multiplier μ
//! the field solves the inner problem min ½‖ρ‖² − μh(ρ), which is convex for
//! μ < 0 since h is a log-Laplace functional. The inner problem runs L-BFGS
//! in the L² inner product of the grid; an outer safeguarded secant search
//! adjusts μ until the constraint holds. Closed-form candidates supply
//! starting points and an upper bound on the rate.

use crate::deviation::{InstantonProfile, ScalingConvention};
use crate::error::{Error, Result};
use crate::grid::{Potential, ScalarField, Slice, HORIZON};
use crate::heat_kernel::density;
use crate::pde::{HeatPotentialSolver, SolverConfig};
use crate::quad::bisect;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Which side of the distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// √(4π)Z ≤ e^{−λ}.
    Lower,
    /// √(4π)Z ≥ e^{λ}.
    Upper,
}

impl Tail {
    pub fn sign(self) -> f64 {
        match self {
            Tail::Lower => -1.0,
            Tail::Upper => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Tail::Lower => "lower",
            Tail::Upper => "upper",
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Tail::Lower),
            "upper" => Ok(Tail::Upper),
            _ => Err(Error::parse(format!("tail must be lower or upper, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// |h − target| allowed for `converged`.
    pub constraint_tol: f64,
    /// ‖ρ − μG‖/‖ρ‖ allowed for `converged`.
    pub stationarity_tol: f64,
    /// Precision the iteration aims for, well inside the tolerances above.
    pub target_precision: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            constraint_tol: 1e-3,
            stationarity_tol: 1e-3,
            target_precision: 1e-6,
            max_outer: 40,
            max_inner: 60,
            memory: 8,
        }
    }
}

/// Where the reported rate comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Optimizer,
    Candidate,
}

#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    pub rho_opt: ScalarField,
    /// ½‖ρ_opt‖² (or the candidate's rate when that is smaller).
    pub rate_value: f64,
    pub constraint_value: f64,
    pub target: f64,
    pub multiplier: f64,
    /// Gradient evaluations.
    pub iterations: usize,
    pub converged: bool,
    /// ‖ρ − μG(ρ)‖/‖ρ‖ at the optimizer's final point.
    pub stationarity: f64,
    pub source: Source,
    /// The optimizer's own final field, whatever `source` says.
    pub optimizer_field: ScalarField,
    pub optimizer_rate: f64,
    pub candidate_rate: f64,
}

/// The near-center field λκ2^{3/2}p(2−s,y)p(s,y), signed by `amplitude`.
///
/// Since p(2−s,y)p(s,y) = p(2,0)·N(y; 0, s(2−s)/2), Gaussian smoothing has a
/// closed form.
#[derive(Clone, Copy, Debug)]
pub struct ProductKernelField {
    pub amplitude: f64,
}

impl ProductKernelField {
    fn variance(s: f64) -> f64 {
        s * (HORIZON - s) / HORIZON
    }

    /// ‖·‖² = 2·amplitude²/√(2π).
    pub fn norm_sq(&self) -> f64 {
        2.0 * self.amplitude * self.amplitude / (2.0 * PI).sqrt()
    }
}

impl Potential for ProductKernelField {
    fn value(&self, s: f64, y: f64) -> f64 {
        if !(s > 0.0 && s < HORIZON) {
            return 0.0;
        }
        self.amplitude * 2f64.powf(1.5) * density(HORIZON, 0.0) * density(Self::variance(s), y)
    }

    fn smoothed_slice(&self, s: f64, sigma: f64) -> Slice<'_> {
        if !(s > 0.0 && s < HORIZON) {
            return Box::new(|_| 0.0);
        }
        let c = self.amplitude * 2f64.powf(1.5) * density(HORIZON, 0.0);
        let v = Self::variance(s) + sigma * sigma;
        Box::new(move |m| c * density(v, m))
    }
}

/// The candidate for (λ, κ) with its exact rate κ²λ²/√(2π) and the
/// solver's check that h ≥ λ.
#[derive(Clone, Debug)]
pub struct NearCenterCandidate {
    pub field: ScalarField,
    pub rate: f64,
    pub h: f64,
    pub verified: bool,
}

/// Near-center candidate on the standard solver grid.
pub fn near_center_candidate(lambda: f64, kappa: f64, cfg: &SolverConfig) -> Result<NearCenterCandidate> {
    if !(lambda > 0.0 && lambda <= 0.3) {
        return Err(Error::domain(format!("candidate needs 0 < λ ≤ 0.3, got {lambda}")));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("candidate needs κ > 1, got {kappa}")));
    }
    let solver = HeatPotentialSolver::standard(cfg)?;
    let f = ProductKernelField { amplitude: lambda * kappa };
    let h = solver.h(&f)?;
    Ok(NearCenterCandidate {
        field: f.sample(solver.grid()).into_owned(),
        rate: kappa * kappa * lambda * lambda / (2.0 * PI).sqrt(),
        h,
        verified: h >= lambda,
    })
}

struct Point {
    rho: ScalarField,
    h: f64,
    g: ScalarField,
}

struct Problem<'a> {
    solver: &'a HeatPotentialSolver,
    cfg: &'a OptimizerConfig,
    target: f64,
    evals: usize,
}

impl Problem<'_> {
    fn eval(&mut self, rho: ScalarField) -> Result<Point> {
        self.evals += 1;
        let g = self.solver.gradient(&rho)?;
        Ok(Point { rho, h: g.h, g: g.field })
    }

    fn objective(p: &Point, mu: f64) -> f64 {
        0.5 * p.rho.norm_sq() - mu * p.h
    }

    fn residual(p: &Point, mu: f64) -> Result<ScalarField> {
        p.rho.combine(1.0, &p.g, -mu)
    }

    fn stationarity(p: &Point, mu: f64) -> Result<f64> {
        let r = Self::residual(p, mu)?.norm_sq().sqrt();
        let scale = p.rho.norm_sq().sqrt().max(mu.abs() * p.g.norm_sq().sqrt());
        Ok(if scale > 0.0 { r / scale } else { 0.0 })
    }

    // L-BFGS on ½‖ρ‖² − μh(ρ) from `start`.
    fn inner(&mut self, mu: f64, mut p: Point) -> Result<Point> {
        let mut hist: VecDeque<(ScalarField, ScalarField, f64)> = VecDeque::new();
        let tol = self.cfg.target_precision;
        for _ in 0..self.cfg.max_inner {
            let grad = Self::residual(&p, mu)?;
            if Self::stationarity(&p, mu)? < tol {
                break;
            }
            // Two-loop recursion.
            let mut q = grad.clone();
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, rho) in hist.iter().rev() {
                let a = rho * s.inner(&q)?;
                q = q.combine(1.0, y, -a)?;
                alphas.push(a);
            }
            if let Some((s, y, _)) = hist.back() {
                let gamma = s.inner(y)? / y.inner(y)?;
                q = q.map(|v| v * gamma);
            }
            for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
                let b = rho * y.inner(&q)?;
                q = q.combine(1.0, s, a - b)?;
            }
            let mut dir = q.map(|v| -v);
            let mut slope = grad.inner(&dir)?;
            if slope >= 0.0 {
                hist.clear();
                dir = grad.map(|v| -v);
                slope = grad.inner(&dir)?;
            }
            let f0 = Self::objective(&p, mu);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..20 {
                let trial = self.eval(p.rho.combine(1.0, &dir, step)?)?;
                if Self::objective(&trial, mu) <= f0 + 1e-4 * step * slope {
                    accepted = Some(trial);
                    break;
                }
                step *= 0.5;
            }
            let Some(next) = accepted else { break };
            let s = next.rho.combine(1.0, &p.rho, -1.0)?;
            let y = Self::residual(&next, mu)?.combine(1.0, &grad, -1.0)?;
            let sy = s.inner(&y)?;
            if sy > 1e-300 {
                hist.push_back((s, y, 1.0 / sy));
                if hist.len() > self.cfg.memory {
                    hist.pop_front();
                }
            }
            p = next;
        }
        Ok(p)
    }

    // Secant on μ ↦ h(ρ(μ)) − target, kept inside a bracket once one exists.
    fn solve(&mut self, start: ScalarField, mu0: f64) -> Result<(Point, f64)> {
        let tol = self.cfg.target_precision * self.target.abs().max(1.0);
        let first = self.eval(start)?;
        let mut mu = mu0;
        let mut p = self.inner(mu, first)?;
        let mut prev: Option<(f64, f64)> = None;
        let (mut lo, mut hi): (Option<(f64, f64)>, Option<(f64, f64)>) = (None, None);
        for _ in 0..self.cfg.max_outer {
            let f = p.h - self.target;
            if f.abs() < tol && Self::stationarity(&p, mu)? < self.cfg.stationarity_tol {
                break;
            }
            if f < 0.0 {
                lo = Some((mu, f));
            } else {
                hi = Some((mu, f));
            }
            let mut next = match prev {
                Some((m1, f1)) if f != f1 => mu - f * (mu - m1) / (f - f1),
                // h is close to linear in μ for small fields.
                _ if p.h.abs() > 1e-12 && p.h.signum() == self.target.signum() => mu * self.target / p.h,
                _ => mu * 1.5,
            };
            if let (Some((a, fa)), Some((b, fb))) = (lo, hi) {
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                if !(next > a && next < b) {
                    // Regula falsi inside the bracket.
                    next = (lo.unwrap().0 * fb - hi.unwrap().0 * fa) / (fb - fa);
                    if !(next > a && next < b) {
                        next = 0.5 * (a + b);
                    }
                }
            }
            prev = Some((mu, f));
            let scale = if mu != 0.0 { next / mu } else { 1.0 };
            let warm = self.eval(p.rho.map(|v| v * scale))?;
            mu = next;
            p = self.inner(mu, warm)?;
        }
        Ok((p, mu))
    }
}

fn run(
    solver: &HeatPotentialSolver,
    target: f64,
    start: ScalarField,
    mu0: f64,
    cfg: &OptimizerConfig,
    candidate: Option<(ScalarField, f64, f64)>,
) -> Result<OptimizationOutcome> {
    let mut problem = Problem { solver, cfg, target, evals: 0 };
    let (p, mu) = problem.solve(start, mu0)?;
    let stationarity = Problem::stationarity(&p, mu)?;
    let converged = (p.h - target).abs() < cfg.constraint_tol && stationarity < cfg.stationarity_tol;
    let optimizer_rate = 0.5 * p.rho.norm_sq();
    let candidate_rate = candidate.as_ref().map_or(f64::INFINITY, |c| c.1);
    let (rho_opt, rate_value, constraint_value, source) = match candidate {
        Some((field, rate, h)) if !converged || rate < optimizer_rate => (field, rate, h, Source::Candidate),
        _ => (p.rho.clone(), optimizer_rate, p.h, Source::Optimizer),
    };
    Ok(OptimizationOutcome {
        rho_opt,
        rate_value,
        constraint_value,
        target,
        multiplier: mu,
        iterations: problem.evals,
        converged,
        stationarity,
        source,
        optimizer_field: p.rho,
        optimizer_rate,
        candidate_rate,
    })
}

// κ with h(field(κ)) = target, by bisection on [lo, hi].
fn match_kappa<F, P>(solver: &HeatPotentialSolver, target: f64, lo: f64, hi: f64, field: F) -> Result<f64>
where
    F: Fn(f64) -> Result<P>,
    P: Potential,
{
    let g = |k: f64| -> f64 {
        match field(k).and_then(|f| solver.h(&f)) {
            Ok(h) => (h - target) * target.signum(),
            Err(_) => f64::NAN,
        }
    };
    let (ga, gb) = (g(lo), g(hi));
    if !(ga < 0.0 && gb > 0.0) {
        return Err(Error::numeric(format!("candidate bracket [{lo}, {hi}] does not straddle the target")));
    }
    bisect(g, lo, hi, 1e-7)
}

/// min ½‖ρ‖² subject to h(ρ;2,0) = −λ (lower) or +λ (upper).
pub fn minimize_rate(
    lambda: f64,
    tail: Tail,
    solver_cfg: &SolverConfig,
    cfg: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("minimize_rate needs λ > 0, got {lambda}")));
    }
    let solver = HeatPotentialSolver::standard(solver_cfg)?;
    let target = tail.sign() * lambda;
    if tail == Tail::Lower && lambda >= 2.0 {
        // Deep enough for the scaled instanton (ρ*)_κ, κ ≈ λ, to be the better start.
        let scaled = |k: f64| InstantonProfile::scaled(k, ScalingConvention::Standard);
        let k = match_kappa(&solver, target, 0.5 * lambda, 4.0 * lambda, scaled)?;
        let f = scaled(k)?;
        let start = f.sample(solver.grid());
        let g = solver.gradient(&start)?.field;
        let mu0 = start.norm_sq() / g.inner(&start)?;
        let candidate = (start.clone(), f.norm_sq() / 2.0, solver.h(&f)?);
        return run(&solver, target, start, mu0, cfg, Some(candidate));
    }
    let g0 = solver.gradient(&ScalarField::zeros(solver.grid()))?.field;
    // ρ = μG₀ gives h ≈ μ‖G₀‖².
    let mu0 = target / g0.norm_sq();
    let start = g0.map(|v| v * mu0);
    if solver.diagnose(&start)?.support_clipped {
        return Err(Error::config("initial field reaches the spatial boundary; enlarge L"));
    }
    let candidate = if lambda <= 0.3 {
        let sign = tail.sign();
        let amp = |k: f64| Ok(ProductKernelField { amplitude: sign * lambda * k });
        match_kappa(&solver, target, 0.5, 2.0, amp).ok().and_then(|k| {
            let f = ProductKernelField { amplitude: sign * lambda * k };
            let h = solver.h(&f).ok()?;
            Some((f.sample(solver.grid()).into_owned(), f.norm_sq() / 2.0, h))
        })
    } else {
        None
    };
    run(&solver, target, start, mu0, cfg, candidate)
}

/// inf{½‖ρ‖² : h_λ(ρ;2,0) ≤ −1}, i.e. λ^{−5/2}Φ(−λ), started from ρ*.
pub fn deep_tail_scaled_value(
    lambda: f64,
    solver_cfg: &SolverConfig,
    cfg: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    if !(lambda >= 10.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("deep-tail problem needs λ ≥ 10, got {lambda}")));
    }
    let solver = HeatPotentialSolver::scaled(solver_cfg, lambda)?;
    let star = InstantonProfile::new();
    let start = star.sample(solver.grid());
    let g = solver.gradient(&start)?.field;
    let mu0 = start.norm_sq() / g.inner(&start)?;
    let scaled = |k: f64| InstantonProfile::scaled(k, ScalingConvention::Standard);
    let candidate = match_kappa(&solver, -1.0, 0.5, 3.0, scaled).ok().and_then(|k| {
        let f = scaled(k).ok()?;
        let h = solver.h(&f).ok()?;
        Some((f.sample(solver.grid()), f.norm_sq() / 2.0, h))
    });
    run(&solver, -1.0, start, mu0, cfg, candidate)
}

/// ⟨ρ*, ρ* − ρ⟩ and ‖ρ‖ for a field on any grid; the near-optimality
/// certificate compares the first to a multiple of 1 + the second.
pub fn instanton_certificate(rho: &ScalarField) -> Result<(f64, f64)> {
    let star = InstantonProfile::new().sample(rho.grid());
    let diff = star.combine(1.0, rho, -1.0)?;
    Ok((star.inner(&diff)?, rho.norm_sq().sqrt()))
}
