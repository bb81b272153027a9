use kpz_ldp::deviation::InstantonProfile;
use kpz_ldp::heat_kernel::eval_kernel;
use kpz_ldp::optimizer::Tail;
use kpz_ldp::she::*;

fn cfg() -> SheConfig {
    SheConfig::default()
}

#[test]
fn single_draw_matches_batch_and_thread_count() {
    let rho = InstantonProfile::new();
    let batch = simulate_batch(0.1, Some(&rho), 6, 11, &cfg()).unwrap();
    let one = simulate_she(0.1, Some(&rho), 11, 4, &cfg()).unwrap();
    assert_eq!(one.z_end, batch[4].z_end);
    assert_eq!(one.log_weight, batch[4].log_weight);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let again = pool.install(|| simulate_batch(0.1, Some(&rho), 6, 11, &cfg()).unwrap());
    for (a, b) in batch.iter().zip(&again) {
        assert_eq!(a.z_center.to_bits(), b.z_center.to_bits());
        assert_eq!(a.log_weight.to_bits(), b.log_weight.to_bits());
    }
}

#[test]
fn vanishing_noise_gives_the_kernel() {
    let c = cfg();
    let s = simulate_she(1e-12, None, 1, 0, &c).unwrap();
    assert_eq!(s.log_weight, 0.0);
    // The grid edge at |x| = 5 absorbs; stay well inside it.
    for j in (0..c.n_x()).step_by(10).filter(|&j| c.x(j).abs() <= 2.5) {
        let p = eval_kernel(2.0, c.x(j)).unwrap();
        assert!((s.z_end[j] - p).abs() < 1e-5 * p, "{}: {} vs {p}", c.x(j), s.z_end[j]);
    }
}

#[test]
fn mean_is_the_kernel() {
    let s = simulate_batch(0.1, None, 4000, 5, &cfg()).unwrap();
    let m = weighted_mean(&s, |s| s.z_center);
    let p = eval_kernel(2.0, 0.0).unwrap();
    assert!(m.deviation_from(p) < 3.0, "{} ± {} vs {p}", m.mean, m.stderr);
}

#[test]
fn tilted_weights_average_to_one() {
    let rho = InstantonProfile::new();
    let s = simulate_batch(0.1, Some(&rho), 4000, 9, &cfg()).unwrap();
    assert!(s.iter().all(|s| s.valid));
    let m = weighted_mean(&s, |_| 1.0);
    assert!(m.deviation_from(1.0) < 3.0, "{} ± {}", m.mean, m.stderr);
    // The tilt moves Z(2,0) down toward e^{h(ρ*)}/√(4π).
    let plain = simulate_batch(0.1, None, 200, 9, &cfg()).unwrap();
    let mean = |v: &[SheSample]| v.iter().map(|s| s.z_center.ln()).sum::<f64>() / v.len() as f64;
    assert!(mean(&s) < mean(&plain) - 0.3);
}

#[test]
fn halving_the_step_keeps_the_mean() {
    let coarse = simulate_batch(0.1, None, 4000, 21, &cfg()).unwrap();
    let fine = simulate_batch(0.1, None, 4000, 22, &SheConfig { dt: 1.0 / 256.0, ..cfg() }).unwrap();
    let (a, b) = (weighted_mean(&coarse, |s| s.z_center), weighted_mean(&fine, |s| s.z_center));
    assert!(a.z_score(&b) < 3.0, "{a:?} {b:?}");
}

#[test]
fn typical_event_has_no_rate() {
    let e = estimate_tail(0.05, 0.0, Tail::Lower, 2000, &TiltPolicy::Instanton, 3, &cfg()).unwrap();
    assert!(e.probability.mean > 0.3 && e.probability.mean < 0.8, "{:?}", e.probability);
    assert!(e.log_rate < 0.05);
    assert!(e.ess <= e.probability.samples as f64);
}

#[test]
fn tilting_reduces_the_relative_error() {
    let run = |p: &TiltPolicy| estimate_tail(0.05, 0.5, Tail::Lower, 3000, p, 17, &cfg()).unwrap();
    let (plain, tilted) = (run(&TiltPolicy::None), run(&TiltPolicy::Instanton));
    let rel = |e: &TailEstimate| e.probability.stderr / e.probability.mean;
    assert!(rel(&tilted) < rel(&plain), "{} vs {}", rel(&tilted), rel(&plain));
    assert!(tilted.probability.z_score(&plain.probability) < 3.0);
    assert!(tilted.probability.mean > 0.0 && tilted.probability.mean <= 1.0);
    assert!(!tilted.low_confidence);
}

#[test]
fn bad_arguments() {
    assert!(simulate_she(0.3, None, 0, 0, &cfg()).is_err());
    assert!(simulate_she(0.0, None, 0, 0, &cfg()).is_err());
    assert!(estimate_tail(0.05, 0.5, Tail::Lower, 10, &TiltPolicy::None, 0, &cfg()).is_err());
    assert!(simulate_she(0.1, None, 0, 0, &SheConfig { dt: 1e-4, ..cfg() }).is_err());
}

#[test]
fn csv_has_the_documented_columns() {
    let e = estimate_tail(0.1, 0.2, Tail::Upper, 1000, &TiltPolicy::Instanton, 2, &cfg()).unwrap();
    let mut buf = Vec::new();
    write_tail_csv(&mut buf, &[e.clone()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# kpz-ldp she-tail v1"));
    assert_eq!(lines.next().unwrap(), TAIL_CSV_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 9);
    assert_eq!(row[2], "upper");
    assert_eq!(row[3], "1000");
    let p: f64 = row[4].parse().unwrap();
    assert!((p - e.probability.mean).abs() <= 1e-9 * p.abs().max(1e-300));
}
