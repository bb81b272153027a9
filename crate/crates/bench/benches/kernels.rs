use criterion::{criterion_group, criterion_main, Criterion};
use kpz_ldp::deviation::InstantonProfile;
use kpz_ldp::geodesic::geodesic_with;
use kpz_ldp::heat_kernel::kernel_overlap_integral;
use kpz_ldp::she::{simulate_she, SheConfig};
use kpz_ldp::{phi_exact, HeatPotentialSolver, SolverConfig};
use std::hint::black_box;

fn rate_function(c: &mut Criterion) {
    c.bench_function("phi_exact sweep", |b| {
        b.iter(|| (-40..=40).map(|k| phi_exact(black_box(k as f64 * 0.5)).unwrap().value).sum::<f64>())
    });
    c.bench_function("kernel overlap", |b| b.iter(kernel_overlap_integral));
    c.bench_function("geodesic 1025 nodes", |b| b.iter(|| geodesic_with(2.0, black_box(0.7), 1025).unwrap().energy));
}

fn solver(c: &mut Criterion) {
    let cfg = SolverConfig { nt: 129, nx: 801, ..SolverConfig::default() };
    let solver = HeatPotentialSolver::standard(&cfg).unwrap();
    let rho = InstantonProfile::new().sample(solver.grid());
    let mut g = c.benchmark_group("solver 129x801");
    g.sample_size(10);
    g.bench_function("h", |b| b.iter(|| solver.h(&rho).unwrap()));
    g.bench_function("gradient", |b| b.iter(|| solver.gradient(&rho).unwrap().h));
    g.finish();
}

fn she(c: &mut Criterion) {
    let cfg = SheConfig::default();
    let mut g = c.benchmark_group("she");
    g.sample_size(20);
    let mut i = 0;
    g.bench_function("one sample", |b| {
        b.iter(|| {
            i += 1;
            simulate_she(0.05, None, 1, i, &cfg).unwrap().z_center
        })
    });
    g.finish();
}

criterion_group!(benches, rate_function, solver, she);
criterion_main!(benches);
