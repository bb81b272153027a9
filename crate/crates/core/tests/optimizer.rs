use kpz_ldp::optimizer::*;
use kpz_ldp::pde::{HeatPotentialSolver, SolverConfig};
use std::f64::consts::PI;

fn coarse() -> SolverConfig {
    SolverConfig { nt: 129, nx: 801, ..SolverConfig::default() }
}

fn quadratic(lambda: f64) -> f64 {
    lambda * lambda / (2.0 * PI).sqrt()
}

#[test]
fn candidate_rate_is_closed_form() {
    let c = near_center_candidate(0.1, 1.05, &coarse()).unwrap();
    assert!((c.rate - 1.05f64.powi(2) * 0.01 / (2.0 * PI).sqrt()).abs() < 1e-15);
    let c2 = near_center_candidate(0.2, 1.05, &coarse()).unwrap();
    assert!((c2.rate / c.rate - 4.0).abs() < 1e-12);
    // The sampled field's grid norm agrees with the exact one away from the
    // endpoint spikes, so compare loosely.
    assert!((0.5 * c.field.norm_sq() / c.rate - 1.0).abs() < 0.05, "{}", 0.5 * c.field.norm_sq() / c.rate);
}

#[test]
fn candidate_reaches_the_upper_level() {
    let c = near_center_candidate(0.05, 1.1, &coarse()).unwrap();
    assert!(c.verified && c.h >= 0.05, "{}", c.h);
}

#[test]
fn candidate_rejects_bad_arguments() {
    assert!(near_center_candidate(0.5, 1.1, &coarse()).is_err());
    assert!(near_center_candidate(0.1, 0.9, &coarse()).is_err());
    assert!(minimize_rate(0.0, Tail::Lower, &coarse(), &OptimizerConfig::default()).is_err());
    assert!(deep_tail_scaled_value(5.0, &SolverConfig::deep_tail(), &OptimizerConfig::default()).is_err());
}

#[test]
fn tail_round_trip() {
    for t in [Tail::Lower, Tail::Upper] {
        assert_eq!(t.to_string().parse::<Tail>().unwrap(), t);
    }
    assert!("both".parse::<Tail>().is_err());
}

#[test]
fn lower_tail_near_center() {
    let lambda = 0.1;
    let out = minimize_rate(lambda, Tail::Lower, &SolverConfig::default(), &OptimizerConfig::default()).unwrap();
    assert!(out.converged);
    assert!(out.stationarity < 1e-3);
    assert!((out.constraint_value + lambda).abs() < 1e-3);
    assert!(out.multiplier < 0.0);
    assert!(out.optimizer_field.max() <= 1e-6);
    assert!(out.rho_opt.max() <= 1e-6);
    // κ → 1 limit of the product-kernel candidate.
    assert!(out.optimizer_rate <= 1.02 * quadratic(lambda), "{}", out.optimizer_rate / quadratic(lambda));
    assert!(out.rate_value <= out.optimizer_rate.min(out.candidate_rate));
    // The minimizer has the shape of the free gradient: ρ ∝ p(2−s,y)p(s,y).
    let solver = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let g0 = solver.gradient(&kpz_ldp::grid::ScalarField::zeros(solver.grid())).unwrap().field;
    let cos = out.optimizer_field.inner(&g0).unwrap() / (out.optimizer_field.norm_sq() * g0.norm_sq()).sqrt();
    assert!(cos < -0.99, "{cos}");
}

#[test]
fn upper_tail_near_center() {
    let lambda = 0.1;
    let out = minimize_rate(lambda, Tail::Upper, &coarse(), &OptimizerConfig::default()).unwrap();
    assert!(out.converged);
    assert!(out.multiplier > 0.0);
    assert!(out.optimizer_field.min() >= -1e-6);
    assert!((out.optimizer_rate / quadratic(lambda) - 1.0).abs() < 0.05);
}

#[test]
fn rate_is_monotone_in_lambda() {
    let mut prev = 0.0;
    for lambda in [0.05, 0.1, 0.2] {
        let out = minimize_rate(lambda, Tail::Lower, &coarse(), &OptimizerConfig::default()).unwrap();
        assert!(out.converged && out.rate_value >= 0.0);
        assert!(out.rate_value > prev, "{lambda}: {} after {prev}", out.rate_value);
        prev = out.rate_value;
    }
}
