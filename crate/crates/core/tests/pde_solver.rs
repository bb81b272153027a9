use kpz_ldp::deviation::InstantonProfile;
use kpz_ldp::grid::{ConstantBox, FnPotential, Potential, ScalarField};
use kpz_ldp::heat_kernel::eval_kernel;
use kpz_ldp::pde::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn coarse() -> SolverConfig {
    SolverConfig { nt: 129, nx: 801, ..SolverConfig::default() }
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

#[test]
fn free_solve_is_the_kernel() {
    let s = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let res = s.solve(&ConstantBox { value: 0.0, half_width: 1.0 }).unwrap();
    assert_eq!(res.h(), 0.0);
    let times = s.grid().times();
    for target in [0.1, 0.5, 1.0, 1.7] {
        let i = times.partition_point(|&t| t < target);
        let t = times[i];
        for x in [-2.0, 0.0, 0.7, 3.0] {
            let p = eval_kernel(t, x).unwrap();
            let z = res.z_field.value(t, x);
            assert!((z - p).abs() < 5e-5 * p.max(1e-3), "({t},{x}): {z} vs {p}");
        }
    }
    // Raw W(2,0) against p(2,0) before normalization.
    let p = eval_kernel(2.0, 0.0).unwrap();
    assert!((s.free_value() - p).abs() < 1e-6 * p, "{}", s.free_value());
    assert_eq!(res.diagnostics.negative_nodes, 0);
    assert!(!res.diagnostics.boundary_warning);
}

#[test]
fn constant_potential_gives_exponential_growth() {
    let s = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    for c in [0.5, -0.5] {
        let res = s.solve(&ConstantBox { value: c, half_width: 100.0 }).unwrap();
        assert!((res.h() - 2.0 * c).abs() < 1e-3, "{c}: {}", res.h());
        assert!(res.diagnostics.support_clipped);
        assert!(res.z_field.values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn config_errors() {
    let mut bad = SolverConfig::default();
    bad.theta = 0.2;
    assert!(HeatPotentialSolver::standard(&bad).is_err());
    // dx = 0.0125 does not resolve λ = 400.
    assert!(HeatPotentialSolver::scaled(&SolverConfig::default(), 400.0).is_err());
    let narrow = SolverConfig { half_width: 4.0, nx: 641, ..SolverConfig::default() };
    assert!(HeatPotentialSolver::standard(&narrow).is_err());
}

#[test]
fn chaos_zeroth_and_first_terms() {
    let rho = ConstantBox { value: 0.3, half_width: 100.0 };
    let p = eval_kernel(1.3, 0.4).unwrap();
    assert_eq!(chaos_term(&rho, 0, 1.3, 0.4).unwrap(), p);
    // Product candidate: Ξ₁(2,0) = λκ p(2,0).
    let (lam, kappa) = (0.1, 1.05);
    let prod = FnPotential(move |s: f64, y: f64| {
        if s <= 0.0 || s >= 2.0 {
            return 0.0;
        }
        lam * kappa * 2f64.powf(1.5) * eval_kernel(2.0 - s, y).unwrap() * eval_kernel(s, y).unwrap()
    });
    let xi1 = chaos_term(&prod, 1, 2.0, 0.0).unwrap();
    let want = lam * kappa * eval_kernel(2.0, 0.0).unwrap();
    assert!((xi1 - want).abs() < 1e-5, "{xi1} vs {want}");
    assert!(chaos_term(&rho, 5, 2.0, 0.0).is_err());
}

#[test]
fn chaos_second_term_for_constant_potential() {
    let c = 0.3;
    let rho = ConstantBox { value: c, half_width: 100.0 };
    let ex = ChaosExpansion::new(&rho, 4, ChaosConfig::default()).unwrap();
    for n in 0..=4 {
        let g = ex.normalized_term(n, 2.0, 0.0).unwrap();
        let want = (2.0 * c).powi(n as i32) / (1..=n).product::<usize>() as f64;
        assert!((g - want).abs() < 1e-3 * want.max(1e-3), "n = {n}: {g} vs {want}");
    }
    let p = eval_kernel(2.0, 0.0).unwrap();
    assert!((ex.term(2, 2.0, 0.0).unwrap() - c * c * 2.0 * p).abs() < 1e-3);
}

#[test]
fn chaos_terms_decay_fast_for_small_fields() {
    let rho = FnPotential(bump);
    let ex = ChaosExpansion::new(&rho, 4, ChaosConfig::default()).unwrap();
    let g: Vec<f64> = (0..=4).map(|n| ex.normalized_term(n, 2.0, 0.0).unwrap().abs()).collect();
    for w in g.windows(2) {
        assert!(w[1] < 0.2 * w[0], "{g:?}");
    }
}

#[test]
fn feynman_kac_trivial_cases() {
    let zero = ConstantBox { value: 0.0, half_width: 10.0 };
    let e = feynman_kac_mc(&zero, 2.0, 0.0, 100, 16, 1).unwrap();
    assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    let c = ConstantBox { value: -0.4, half_width: 100.0 };
    let e = feynman_kac_mc(&c, 2.0, 0.5, 100, 16, 1).unwrap();
    assert!((e.mean - (-0.8f64).exp()).abs() < 1e-12 || e.deviation_from((-0.8f64).exp()) < 3.0);
    assert!(feynman_kac_mc(&c, 2.0, 0.0, 0, 16, 1).is_err());
    assert!(feynman_kac_mc(&c, 2.0, 0.0, 10, 1, 1).is_err());
}

#[test]
fn feynman_kac_is_reproducible_across_thread_counts() {
    let rho = FnPotential(bump);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| feynman_kac_mc(&rho, 2.0, 0.0, 2000, 64, 11).unwrap());
    let b = four.install(|| feynman_kac_mc(&rho, 2.0, 0.0, 2000, 64, 11).unwrap());
    assert_eq!(a, b);
}

#[test]
fn oracle_triangle_on_smooth_fields() {
    let solver = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let fields: [fn(f64, f64) -> f64; 3] = [bump, well, ripple];
    for (k, f) in fields.into_iter().enumerate() {
        let rho = FnPotential(f);
        let norm = rho.sample(solver.grid()).norm_sq().sqrt();
        assert!(norm <= 0.2, "‖ρ‖ = {norm}");
        let pde = solver.ratio(&rho).unwrap();
        let chaos = ChaosExpansion::new(&rho, 4, ChaosConfig::default()).unwrap().partial_ratio(4, 2.0, 0.0).unwrap();
        let mc = feynman_kac_mc(&rho, 2.0, 0.0, 100_000, 512, 100 + k as u64).unwrap();
        let tol = 1e-3f64.max(3.0 * mc.stderr);
        assert!((pde - chaos).abs() < 1e-3, "field {k}: pde {pde} chaos {chaos}");
        assert!((pde - mc.mean).abs() < tol, "field {k}: pde {pde} mc {mc:?}");
        assert!((chaos - mc.mean).abs() < tol, "field {k}: chaos {chaos} mc {mc:?}");
    }
}

#[test]
fn instanton_monte_carlo_matches_solver() {
    let solver = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let star = InstantonProfile::new();
    let pde = solver.ratio(&star).unwrap();
    let mc = feynman_kac_mc(&star, 2.0, 0.0, 100_000, 1024, 5).unwrap();
    assert!(mc.deviation_from(pde) < 3.0, "pde {pde} mc {mc:?}");
}

#[test]
fn grid_refinement_is_second_order() {
    let rho = FnPotential(ripple);
    let h: Vec<f64> = [(129, 801), (257, 1601), (513, 3201)]
        .iter()
        .map(|&(nt, nx)| {
            let cfg = SolverConfig { nt, nx, ..SolverConfig::default() };
            HeatPotentialSolver::standard(&cfg).unwrap().h(&rho).unwrap()
        })
        .collect();
    let (d1, d2) = ((h[0] - h[1]).abs(), (h[1] - h[2]).abs());
    assert!(d2 <= d1 / 4.0 * 1.1 || d2 < 1e-12, "{h:?}: {d1:e} {d2:e}");
}

#[test]
fn free_gradient_is_the_bridge_density() {
    let s = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let g = s.gradient(&ConstantBox { value: 0.0, half_width: 1.0 }).unwrap();
    assert_eq!(g.h, 0.0);
    assert!((g.field.integral() - 2.0).abs() < 1e-3, "{}", g.field.integral());
    let p20 = eval_kernel(2.0, 0.0).unwrap();
    for (t, x) in [(0.5, 0.0), (1.0, 0.4), (1.6, -0.3), (0.01, 0.02), (1.995, 0.0)] {
        let want = eval_kernel(2.0 - t, x).unwrap() * eval_kernel(t, x).unwrap() / p20;
        let got = g.field.value(t, x);
        assert!((got - want).abs() < 2e-3 * want, "({t},{x}): {got} vs {want}");
    }
    assert!(g.field.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn gradient_matches_finite_differences() {
    let s = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap();
    let grid = s.grid().clone();
    let base = ScalarField::from_fn(&grid, bump);
    let g = s.gradient(&base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-4;
    for _ in 0..5 {
        let (tc, xc) = (rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0));
        let (wt, wx) = (rng.random_range(0.08..0.2), rng.random_range(0.2..0.6));
        let chi = ScalarField::from_fn(&grid, |t, x| (-((t - tc) / wt).powi(2) - ((x - xc) / wx).powi(2)).exp());
        let plus = s.h(&base.combine(1.0, &chi, eps).unwrap()).unwrap();
        let minus = s.h(&base.combine(1.0, &chi, -eps).unwrap()).unwrap();
        let fd = (plus - minus) / (2.0 * eps);
        let ad = g.field.inner(&chi).unwrap();
        assert!((fd - ad).abs() < 1e-3 * fd.abs(), "fd {fd} adjoint {ad}");
    }
}

#[test]
fn scaled_h_basics() {
    let cfg = coarse();
    let s = HeatPotentialSolver::scaled(&cfg, 2.0).unwrap();
    assert_eq!(s.h(&ConstantBox { value: 0.0, half_width: 1.0 }).unwrap(), 0.0);
    // λ⁻¹ log W for constant c is 2c again.
    let h = s.h(&ConstantBox { value: 0.25, half_width: 100.0 }).unwrap();
    assert!((h - 0.5).abs() < 1e-6, "{h}");
}

#[test]
fn scaled_solve_matches_rescaled_unscaled_solve() {
    let lam: f64 = 4.0;
    let scaled = scaled_h(&FnPotential(bump), lam, &SolverConfig::default()).unwrap();
    let stretched = FnPotential(move |t: f64, x: f64| lam * bump(t, x / lam.sqrt()));
    let unscaled = HeatPotentialSolver::standard(&SolverConfig::default()).unwrap().h(&stretched).unwrap() / lam;
    assert!((scaled - unscaled).abs() < 1e-4, "{scaled} vs {unscaled}");
}

#[test]
fn deep_tail_instanton_value() {
    // h_λ(ρ*;2,0) tends to −1 slowly; the converged value at λ = 40 is −0.888.
    let s = HeatPotentialSolver::scaled(&SolverConfig::deep_tail(), 40.0).unwrap();
    let h = s.h(&InstantonProfile::new()).unwrap();
    assert!((h + 0.888).abs() < 2e-3, "{h}");
    let h80 = scaled_h(
        &InstantonProfile::scaled(1.1, kpz_ldp::deviation::ScalingConvention::Standard).unwrap(),
        80.0,
        &SolverConfig { nt: 2049, nx: 4801, ..SolverConfig::deep_tail() },
    )
    .unwrap();
    assert!(h80 < -1.0, "{h80}");
}

#[test]
fn solve_field_and_h_at() {
    let res = solve_forward(&FnPotential(well), &coarse()).unwrap();
    assert!(res.h_at(0.001, 0.0).is_err());
    let direct = res.h_at(1.0, 0.0).unwrap();
    let z = res.z_field.value(1.0, 0.0);
    assert!((direct - ((4.0 * PI).sqrt() * z).ln()).abs() < 1e-14);
    assert!(res.h() < 0.0);
    let mut buf = Vec::new();
    res.z_field.write_csv(&mut buf).unwrap();
    let back = ScalarField::read_csv(&buf[..]).unwrap();
    assert_eq!(back.grid(), res.z_field.grid());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn scaled_h_is_monotone(a in -0.3f64..0.3, b in 0.0f64..0.3, w in 0.3f64..1.5) {
        let s = HeatPotentialSolver::scaled(&coarse(), 2.0).unwrap();
        let lo = FnPotential(move |t: f64, x: f64| a * (-(x / w).powi(2)).exp() * t * (2.0 - t));
        let hi = FnPotential(move |t: f64, x: f64| (a + b) * (-(x / w).powi(2)).exp() * t * (2.0 - t));
        prop_assert!(s.h(&lo).unwrap() <= s.h(&hi).unwrap() + 1e-12);
    }

    #[test]
    fn solutions_stay_positive(c in -1.0f64..1.0, xc in -2.0f64..2.0) {
        let s = HeatPotentialSolver::standard(&coarse()).unwrap();
        let rho = FnPotential(move |_t: f64, x: f64| c * (-(x - xc).powi(2)).exp());
        let d = s.diagnose(&rho).unwrap();
        prop_assert_eq!(d.negative_nodes, 0);
    }
}
