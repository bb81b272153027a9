use kpz_ldp::rate::{lambda_c, phi_asymptotic, phi_exact, phi_exact_with, polylog, Branch, PhiConfig, Regime};
use proptest::prelude::*;
use std::f64::consts::PI;

// Li_s(−z) at 40 digits from mpmath, truncated to 20 significant digits.
const LI_15: [(f64, f64); 15] = [
    (-1.0, 2.612_375_348_685_488_343_3),
    (-0.9, 1.614_438_528_566_339_725_6),
    (-0.6, 0.798_208_851_444_233_133_08),
    (-0.5, 0.624_837_020_819_913_853_63),
    (-0.3, 0.338_311_095_544_806_269_3),
    (0.2, -0.187_222_326_316_182_358_68),
    (0.5, -0.429_887_321_580_579_267_78),
    (0.55, -0.466_817_021_816_832_257_84),
    (1.0, -0.765_147_024_625_407_945_37),
    (3.0, -1.679_089_730_504_828_135_3),
    (10.0, -3.285_684_082_333_892_838_5),
    (1e3, -14.018_663_493_590_660_194),
    (1e6, -38.879_943_579_978_499_062),
    (10_686_474_581_524.463, -123.777_347_750_098_331_28),
    (1.694_889_244_410_333e28, -394.330_760_854_407_643_85),
];
const LI_25: [(f64, f64); 15] = [
    (-1.0, 1.341_487_257_250_917_179_8),
    (-0.9, 1.139_003_025_202_156_794_6),
    (-0.6, 0.683_853_159_328_073_764_73),
    (-0.5, 0.554_997_278_717_512_293_21),
    (-0.3, 0.317_948_969_478_329_621_43),
    (0.2, -0.193_397_217_405_292_252_56),
    (0.5, -0.462_297_782_190_063_438_19),
    (0.55, -0.505_009_368_199_709_483_07),
    (1.0, -0.867_199_889_012_184_138_19),
    (3.0, -2.162_700_712_002_056_662_3),
    (10.0, -5.088_775_864_187_182_658_3),
    (1e3, -42.582_423_253_162_707_532),
    (1e6, -220.360_481_473_597_680_69),
    (10_686_474_581_524.463, -1_493.455_999_230_879_965_4),
    (1.694_889_244_410_333e28, -10_264.569_694_096_252_667),
];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn polylog_matches_reference_table() {
    for (s, table) in [(1.5, &LI_15), (2.5, &LI_25)] {
        for &(z, want) in table.iter() {
            let got = polylog(s, z).unwrap();
            assert!(close(got, want, 1e-10), "Li_{s}(−{z}) = {got}, want {want}");
        }
    }
}

#[test]
fn polylog_zero_is_zero() {
    assert_eq!(polylog(2.5, 0.0).unwrap(), 0.0);
}

// Cohen–Rodriguez Villegas–Zagier acceleration of Σ_{k≥0} (−1)^k a_k.
fn alternating_sum(a: impl Fn(usize) -> f64, n: usize) -> f64 {
    let d = (3.0 + 8f64.sqrt()).powi(n as i32);
    let d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for k in 0..n {
        c = b - c;
        s += c * a(k);
        let kf = k as f64;
        let nf = n as f64;
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

#[test]
fn eta_at_minus_one_matches_accelerated_series() {
    // Li_{5/2}(−1) = −η(5/2) = −Σ (−1)^{k}/(k+1)^{5/2}.
    let eta = alternating_sum(|k| ((k + 1) as f64).powf(-2.5), 40);
    let zeta = 1.341_487_257_250_917_179_8;
    assert!((eta - (1.0 - 2f64.powf(-1.5)) * zeta).abs() < 1e-13);
    let got = polylog(2.5, 1.0).unwrap();
    assert!((got + eta).abs() < 1e-10, "{got} vs {}", -eta);
}

#[test]
fn series_and_integral_overlap() {
    // Both representations evaluated on [0.4, 0.6] must agree; the public
    // function switches at 0.5, so compare across the seam.
    for s in [1.5, 2.5] {
        let a = polylog(s, 0.5).unwrap();
        let b = polylog(s, 0.500_000_001).unwrap();
        assert!((a - b).abs() < 1e-8);
        let a = polylog(s, -0.5).unwrap();
        let b = polylog(s, -0.500_000_001).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn critical_point_value() {
    assert!((lambda_c() - 0.960_259_902_730_785_228_14).abs() < 1e-12);
}

#[test]
fn phi_reference_values() {
    // mpmath evaluations of the same extremal problem.
    let cases = [
        (-60.0, 2894.30, 1e-5),
        (-30.0, 576.447, 1e-5),
        (-10.0, 49.510, 1e-4),
        (0.5, 0.098_416_65, 1e-6),
        (10.0, 30.3476, 1e-5),
        (30.0, 191.185, 1e-5),
        (60.0, 574.150, 1e-5),
    ];
    for (lambda, want, tol) in cases {
        let got = phi_exact(lambda).unwrap().value;
        assert!(close(got, want, tol), "Φ({lambda}) = {got}, want {want}");
    }
}

#[test]
fn phi_zero_and_branches() {
    let e = phi_exact(0.0).unwrap();
    assert_eq!(e.value, 0.0);
    assert_eq!(e.z_opt, 0.0);
    let lc = lambda_c();
    assert_eq!(phi_exact(lc - 0.1).unwrap().branch, Branch::BelowCritical);
    assert_eq!(phi_exact(lc + 0.1).unwrap().branch, Branch::AboveCritical);
}

#[test]
fn phi_quadratic_near_zero() {
    let c = 1.0 / (2.0 * PI).sqrt();
    let r = phi_exact(-0.1).unwrap().value / 0.01;
    assert!((r / c - 1.0).abs() < 0.02);
    for lambda in [-0.025, 0.025] {
        let r = phi_exact(lambda).unwrap().value / (lambda * lambda);
        assert!((r / c - 1.0).abs() < 0.02, "λ = {lambda}: {r}");
    }
}

#[test]
fn branch_continuity() {
    let lc = lambda_c();
    let a = phi_exact(lc - 1e-6).unwrap();
    let b = phi_exact(lc + 1e-6).unwrap();
    assert!((a.value - b.value).abs() < 1e-4);
    assert!((a.value - 0.358_510_17).abs() < 1e-6);
    assert!((a.z_opt - b.z_opt).abs() < 1e-3);
}

#[test]
fn literal_log_exponent_grows_linearly() {
    let cfg = PhiConfig { log_exponent: 1.0 };
    let v = phi_exact_with(60.0, cfg).unwrap().value;
    assert!((v - 79.26).abs() < 0.05, "{v}");
}

#[test]
fn asymptotic_laws() {
    let c = 1.0 / (2.0 * PI).sqrt();
    assert!((phi_asymptotic(0.2, Regime::Quadratic).unwrap() - 0.04 * c).abs() < 1e-15);
    let v = phi_asymptotic(-10.0, Regime::LowerFiveHalves).unwrap();
    assert!((v - 26.84).abs() < 5e-3);
    let v = phi_asymptotic(10.0, Regime::UpperThreeHalves).unwrap();
    assert!((v - 4.0 / 3.0 * 10f64.powf(1.5)).abs() < 1e-12);
    assert!(phi_asymptotic(10.0, Regime::LowerFiveHalves).is_err());
    assert!(phi_asymptotic(-10.0, Regime::UpperThreeHalves).is_err());
}

#[test]
fn tail_ratios_approach_one_monotonically() {
    let sweeps: [(&[f64], Regime); 3] = [
        (&[-0.4, -0.2, -0.1, -0.05, -0.025], Regime::Quadratic),
        (&[-10.0, -20.0, -30.0, -40.0, -60.0], Regime::LowerFiveHalves),
        (&[10.0, 20.0, 30.0, 40.0, 60.0], Regime::UpperThreeHalves),
    ];
    for (lams, regime) in sweeps {
        let gaps: Vec<f64> = lams
            .iter()
            .map(|&l| (phi_exact(l).unwrap().value / phi_asymptotic(l, regime).unwrap() - 1.0).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{regime:?}: {gaps:?}");
    }
}

#[test]
fn z_opt_is_continuous_within_branches() {
    let lams: Vec<f64> = (0..60).map(|i| -3.0 + 0.05 * i as f64).collect();
    let zs: Vec<f64> = lams.iter().map(|&l| phi_exact(l).unwrap().z_opt).collect();
    for w in zs.windows(3) {
        let slope = (w[1] - w[0]).abs().max(1e-12);
        assert!((w[2] - w[1]).abs() < 10.0 * slope + 1e-9, "{w:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phi_is_nonnegative(lambda in -40.0f64..40.0) {
        let v = phi_exact(lambda).unwrap().value;
        prop_assert!(v >= 0.0);
        prop_assert!(lambda == 0.0 || v > 0.0);
    }

    #[test]
    fn phi_is_monotone_away_from_zero(lambda in 0.01f64..20.0, d in 0.01f64..1.0) {
        prop_assert!(phi_exact(lambda + d).unwrap().value >= phi_exact(lambda).unwrap().value);
        prop_assert!(phi_exact(-lambda - d).unwrap().value >= phi_exact(-lambda).unwrap().value);
    }

    #[test]
    fn polylog_one_half_three_halves_derivative(z in 0.05f64..50.0) {
        // d/dz Li_{5/2}(−z) = Li_{3/2}(−z)/z.
        let h = 1e-5 * z;
        let fd = (polylog(2.5, z + h).unwrap() - polylog(2.5, z - h).unwrap()) / (2.0 * h);
        let an = polylog(1.5, z).unwrap() / z;
        prop_assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()));
    }
}
