use kpz_ldp::heat_kernel::{
    eval_kernel, kernel_normalization, kernel_overlap_integral, kernel_overlap_integral_with, overlap_constant,
    overlap_integrand, OverlapQuadrature,
};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn kernel_against_extended_precision() {
    // 40-digit evaluation of exp(−1.69)/√π.
    let want = 0.104_103_993_398_034_839_159_366_887_336_459_5;
    assert!((eval_kernel(0.5, 1.3).unwrap() - want).abs() < 1e-14);
    assert!((eval_kernel(1.0, 0.0).unwrap() - 0.398_942_280_4).abs() < 1e-10);
    assert_eq!(eval_kernel(2.0, 0.0).unwrap(), 1.0 / (4.0 * PI).sqrt());
}

#[test]
fn normalization() {
    for (t, l) in [(1.0, 8.0), (2.0, 10.0)] {
        let n = kernel_normalization(t, l).unwrap();
        assert!((n.mass - 1.0).abs() < 1e-10, "t = {t}: {}", n.mass);
        assert!(!n.truncated);
    }
    let n = kernel_normalization(2.0, 1.0).unwrap();
    // erf(L/√(2t)) = erf(1/2).
    assert!((n.mass - 0.520_499_877_813_046_5).abs() < 1e-5);
    assert!(n.truncated);
    assert!(kernel_normalization(0.0, 1.0).is_err());
}

#[test]
fn overlap_identity() {
    let v = kernel_overlap_integral();
    assert!((v - overlap_constant()).abs() < 1e-6, "{v}");
    assert!((overlap_constant() - 0.099_735_6).abs() < 1e-7);
    let refined = kernel_overlap_integral_with(OverlapQuadrature::default().refined());
    assert!((refined - v).abs() < 1e-8);
    assert!((overlap_integrand(1.0, 0.0) - eval_kernel(1.0, 0.0).unwrap().powi(4)).abs() < 1e-17);
}

#[test]
fn decreasing_at_origin() {
    let vals: Vec<f64> = (1..200).map(|i| eval_kernel(0.01 * i as f64, 0.0).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

proptest! {
    #[test]
    fn symmetric_in_x(t in 1e-3f64..5.0, x in -20.0f64..20.0) {
        prop_assert_eq!(eval_kernel(t, x).unwrap(), eval_kernel(t, -x).unwrap());
        prop_assert!(eval_kernel(t, x).unwrap() >= 0.0);
    }

    #[test]
    fn semigroup(s_frac in 0.05f64..0.95, t in 0.2f64..2.0, x in -5.0f64..5.0) {
        let s = s_frac * t;
        let h = 1.0 / 256.0;
        let l = 10.0;
        let n = (2.0 * l / h) as usize;
        let vals: Vec<f64> = (0..=n)
            .map(|i| {
                let y = -l + i as f64 * h;
                eval_kernel(t - s, x - y).unwrap() * eval_kernel(s, y).unwrap()
            })
            .collect();
        let conv = h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n]));
        prop_assert!((conv - eval_kernel(t, x).unwrap()).abs() < 1e-8);
    }
}
