//! The acceptance criteria as runnable checks, shared by the test suite and
//! the `selftest` command.

use crate::deviation::{ell, integral_r, InstantonProfile};
use crate::error::Result;
use crate::geodesic::{direct_minimize, family_distance, path_energy, DiscretePath};
use crate::grid::{FnPotential, Potential, ScalarField};
use crate::heat_kernel::{eval_kernel, kernel_overlap_integral};
use crate::optimizer::{deep_tail_scaled_value, instanton_certificate, minimize_rate, OptimizerConfig, Tail};
use crate::pde::{feynman_kac_mc, ChaosConfig, ChaosExpansion, HeatPotentialSolver, SolverConfig};
use crate::rate::{lambda_c, phi_exact};
use crate::she::{estimate_tail, simulate_batch, tilt_field, weighted_mean, SheConfig, TiltPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

/// Criterion numbers with short titles.
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "instanton integrals"),
    (2, "kernel identity"),
    (3, "geodesic energies"),
    (4, "oracle triangle"),
    (5, "gradient correctness"),
    (6, "quadratic law"),
    (7, "five-halves law"),
    (8, "upper-tail 3/2 check"),
    (9, "branch point"),
    (10, "SHE diagnostic"),
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Reported but never fails the criterion.
    pub warning_only: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, warning_only: false, detail }
    }

    fn warning(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, warning_only: true, detail }
    }

    fn close(name: &str, got: f64, want: f64, tol: f64) -> Self {
        let err = (got - want).abs();
        Check::new(name, err <= tol, format!("{got:.9} vs {want:.9}, |Δ| = {err:.2e} (tol {tol:.0e})"))
    }

    fn relative(name: &str, got: f64, want: f64, tol: f64) -> Self {
        let err = (got / want - 1.0).abs();
        Check::new(name, err <= tol, format!("{got:.7} vs {want:.7}, rel {err:.2e} (tol {tol:.0e})"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.warning_only)
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "criterion {:>2} {verdict}: {}", self.id, self.title)?;
        for c in &self.checks {
            let tag = match (c.passed, c.warning_only) {
                (true, _) => "ok",
                (false, true) => "warn",
                (false, false) => "FAIL",
            };
            writeln!(f, "    [{tag}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Runs one criterion. Numerical errors surface as failed checks.
pub fn run_criterion(id: u8) -> CriterionReport {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let checks = match id {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(),
        8 => c8(),
        9 => c9(),
        10 => c10(),
        _ => Ok(vec![Check::new("criterion", false, format!("no criterion {id}"))]),
    };
    let checks = checks.unwrap_or_else(|e| vec![Check::new("evaluation", false, e.to_string())]);
    CriterionReport { id, title, checks }
}

fn c1() -> Result<Vec<Check>> {
    Ok(vec![
        Check::close("∫₀² r dt = 2π", integral_r()?, 2.0 * PI, 1e-5),
        Check::close("½‖ρ*‖² = 4/(15π)", 0.5 * InstantonProfile::new().norm_sq_quadrature()?, 4.0 / (15.0 * PI), 1e-4),
    ])
}

fn c2() -> Result<Vec<Check>> {
    Ok(vec![Check::close(
        "∬ p(2−s,y)²p(s,y)² = 2^{−5/2}π^{−1/2}",
        kernel_overlap_integral(),
        2f64.powf(-2.5) / PI.sqrt(),
        1e-6,
    )])
}

fn c3() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for alpha in [0.0, 0.5, -0.5, 1.0, -1.0] {
        let e = path_energy(&DiscretePath::family_member(alpha, 2.0, 2049)?);
        out.push(Check::close(&format!("ℰ(αℓ), α = {alpha}"), e, 1.0, 1e-3));
    }
    let d = direct_minimize(2.0, 0.0, 513, 2000, 7)?;
    out.push(Check::close("descent energy at (2,0)", d.energy, 1.0, 1e-3));
    let (alpha, dist) = family_distance(&d.path);
    out.push(Check::new(
        "descent near the αℓ family",
        dist <= 2e-2,
        format!("sup distance {dist:.2e} to α = {alpha:.3} (tol 2e-2)"),
    ));
    let d = direct_minimize(1.0, 0.5 * ell(1.0), 513, 2000, 3)?;
    let worst =
        d.path.times().iter().zip(d.path.positions()).fold(0.0f64, |m, (s, y)| m.max((y - 0.5 * ell(*s)).abs()));
    out.push(Check::new(
        "descent at (1, ℓ(1)/2) lands on ℓ/2",
        worst <= 1e-2,
        format!("sup distance {worst:.2e} (tol 1e-2)"),
    ));
    Ok(out)
}

fn bump(t: f64, x: f64) -> f64 {
    0.1 * (-(x - 0.3).powi(2)).exp() * (PI * t / 2.0).sin()
}

fn well(t: f64, x: f64) -> f64 {
    -0.15 * (-2.0 * x * x).exp() * t * (2.0 - t)
}

fn ripple(t: f64, x: f64) -> f64 {
    0.08 * (2.0 * x).cos() * (-x * x / 4.0).exp() * (1.0 + 0.5 * (PI * t).cos())
}

fn c4() -> Result<Vec<Check>> {
    let solver = HeatPotentialSolver::standard(&SolverConfig::default())?;
    let fields: [(&str, fn(f64, f64) -> f64); 3] = [("bump", bump), ("well", well), ("ripple", ripple)];
    let mut out = Vec::new();
    for (k, (name, f)) in fields.into_iter().enumerate() {
        let rho = FnPotential(f);
        let norm = rho.sample(solver.grid()).norm_sq().sqrt();
        let pde = solver.ratio(&rho)?;
        let chaos = ChaosExpansion::new(&rho, 4, ChaosConfig::default())?.partial_ratio(4, 2.0, 0.0)?;
        let mc = feynman_kac_mc(&rho, 2.0, 0.0, 100_000, 512, 100 + k as u64)?;
        let tol = 1e-3f64.max(3.0 * mc.stderr);
        let worst = (pde - chaos).abs().max((pde - mc.mean).abs()).max((chaos - mc.mean).abs());
        out.push(Check::new(
            name,
            norm <= 0.2 && worst <= tol,
            format!("‖ρ‖ = {norm:.3}; pde {pde:.7}, chaos {chaos:.7}, mc {:.7} ± {:.1e}; worst pair {worst:.1e} (tol {tol:.1e})", mc.mean, mc.stderr),
        ));
    }
    Ok(out)
}

fn c5() -> Result<Vec<Check>> {
    let s = HeatPotentialSolver::standard(&SolverConfig::default())?;
    let grid = s.grid().clone();
    let base = ScalarField::from_fn(&grid, bump);
    let g = s.gradient(&base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-4;
    let mut out = Vec::new();
    for k in 0..5 {
        let (tc, xc) = (rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0));
        let (wt, wx) = (rng.random_range(0.08..0.2), rng.random_range(0.2..0.6));
        let chi = ScalarField::from_fn(&grid, |t, x| (-((t - tc) / wt).powi(2) - ((x - xc) / wx).powi(2)).exp());
        let fd = (s.h(&base.combine(1.0, &chi, eps)?)? - s.h(&base.combine(1.0, &chi, -eps)?)?) / (2.0 * eps);
        let ad = g.field.inner(&chi)?;
        let rel = (fd - ad).abs() / fd.abs();
        out.push(Check::new(
            &format!("direction {k}"),
            rel < 1e-3,
            format!("fd {fd:.8}, adjoint {ad:.8}, rel {rel:.1e} (tol 1e-3)"),
        ));
    }
    Ok(out)
}

fn c6() -> Result<Vec<Check>> {
    let c = 1.0 / (2.0 * PI).sqrt();
    let mut out = Vec::new();
    for tail in [Tail::Lower, Tail::Upper] {
        let mut gaps = Vec::new();
        let mut detail = Vec::new();
        let mut converged = true;
        for lambda in [0.05, 0.1, 0.2] {
            let o = minimize_rate(lambda, tail, &SolverConfig::default(), &OptimizerConfig::default())?;
            converged &= o.converged;
            let ratio = o.rate_value / (lambda * lambda);
            gaps.push((ratio - c).abs());
            detail.push(format!(
                "λ={lambda}: {ratio:.5} ({:?}, optimizer {:.5})",
                o.source,
                o.optimizer_rate / (lambda * lambda)
            ));
        }
        out.push(Check::new(
            &format!("{tail} tail rate/λ² at λ = 0.05"),
            converged && gaps[0] / c <= 0.03,
            format!("{}; converged {converged}", detail.join(", ")),
        ));
        out.push(Check::new(
            &format!("{tail} tail monotone approach"),
            gaps.windows(2).all(|w| w[0] <= w[1]),
            format!("|rate/λ² − 1/√(2π)| = {:.2e}, {:.2e}, {:.2e}", gaps[0], gaps[1], gaps[2]),
        ));
    }
    for lambda in [-0.025, 0.025] {
        let v = phi_exact(lambda)?.value / (lambda * lambda);
        out.push(Check::relative(&format!("exact Φ({lambda})/λ²"), v, c, 0.02));
    }
    Ok(out)
}

fn c7() -> Result<Vec<Check>> {
    let limit = 4.0 / (15.0 * PI);
    let lambda = 40.0;
    let o = deep_tail_scaled_value(lambda, &SolverConfig::deep_tail(), &OptimizerConfig::default())?;
    let exact = phi_exact(-lambda)?.value / lambda.powf(2.5);
    let mut rate = Check::relative("λ^{−5/2}Φ(−40) from the optimizer vs 4/(15π)", o.rate_value, limit, 0.05);
    rate.detail += &format!("; exact formula gives {exact:.5} at this λ, optimizer rate {:.5}", o.optimizer_rate);
    let h = HeatPotentialSolver::scaled(&SolverConfig::deep_tail(), lambda)?.h(&InstantonProfile::new())?;
    let feasible = Check::new("h_λ(ρ*;2,0) ≤ −0.95 at λ = 40", h <= -0.95, format!("h = {h:.5}"));
    let (lhs, norm) = instanton_certificate(&o.rho_opt)?;
    let cert = Check::new(
        "⟨ρ*, ρ* − ρ_opt⟩ ≤ 0.02(1 + ‖ρ_opt‖)",
        lhs <= 0.02 * (1.0 + norm),
        format!("{lhs:.4e} vs {:.4e}", 0.02 * (1.0 + norm)),
    );
    let v = phi_exact(-60.0)?.value / 60f64.powf(2.5);
    Ok(vec![rate, feasible, cert, Check::relative("exact Φ(−60)/60^{5/2} vs 4/(15π)", v, limit, 0.01)])
}

fn c8() -> Result<Vec<Check>> {
    let v = phi_exact(60.0)?.value / 60f64.powf(1.5);
    Ok(vec![Check::relative("exact Φ(60)/60^{3/2} vs 4/3", v, 4.0 / 3.0, 0.01)])
}

fn c9() -> Result<Vec<Check>> {
    let lc = lambda_c();
    let (a, b) = (phi_exact(lc - 1e-9)?.value, phi_exact(lc + 1e-9)?.value);
    let z = phi_exact(0.0)?.value;
    Ok(vec![
        Check::new("continuity at λ_c", (a - b).abs() <= 1e-4, format!("{a:.9} | {b:.9}")),
        Check::new("Φ(0) = 0", z == 0.0, format!("{z}")),
    ])
}

fn c10() -> Result<Vec<Check>> {
    let cfg = SheConfig::default();
    let p = eval_kernel(2.0, 0.0)?;
    let n = 10_000;
    let plain = simulate_batch(0.1, None, n, 1, &cfg)?;
    let tilt = tilt_field(0.5, Tail::Lower)?;
    let tilted = simulate_batch(0.1, Some(tilt.as_ref()), n, 2, &cfg)?;
    let mut out = Vec::new();
    let m = weighted_mean(&plain, |s| s.z_center);
    out.push(Check::new(
        "E[Z_ε(2,0)] = p(2,0) at ε = 0.1",
        m.deviation_from(p) <= 3.0,
        format!("{:.6} ± {:.1e} vs {p:.6} ({:.2} se)", m.mean, m.stderr, m.deviation_from(p)),
    ));
    let j = (0.5 / cfg.dx).round() as usize + cfg.n_x() / 2;
    let functionals: [(&str, Box<dyn Fn(&crate::she::SheSample) -> f64>); 3] = [
        ("Z(2,0)", Box::new(|s| s.z_center)),
        ("Z(2,0.5)", Box::new(move |s| s.z_end[j])),
        ("1{√(4π)Z(2,0) ≤ 1}", Box::new(|s| f64::from((4.0 * PI).sqrt() * s.z_center <= 1.0))),
    ];
    for (name, f) in functionals {
        let (a, b) = (weighted_mean(&plain, &f), weighted_mean(&tilted, &f));
        let z = a.z_score(&b);
        out.push(Check::new(
            &format!("tilted vs untilted {name}"),
            z <= 3.0,
            format!("{:.5} ± {:.1e} vs {:.5} ± {:.1e} ({z:.2} se)", a.mean, a.stderr, b.mean, b.stderr),
        ));
    }
    let e = estimate_tail(0.05, 0.5, Tail::Lower, n, &TiltPolicy::Instanton, 3, &cfg)?;
    let phi = phi_exact(-0.5)?.value;
    let rel = (e.log_rate / phi - 1.0).abs();
    out.push(Check::warning(
        "−ε log P̂ within 15% of Φ(−0.5) at ε = 0.05",
        rel <= 0.15,
        format!(
            "{:.4} vs {phi:.4} (rel {rel:.2}); P̂ = {:.3e} ± {:.1e}, ess {:.0}, {}",
            e.log_rate,
            e.probability.mean,
            e.probability.stderr,
            e.ess,
            e.flags()
        ),
    ));
    Ok(out)
}
