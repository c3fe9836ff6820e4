use std::f64::consts::PI;

use crackband_core::asymptotics::*;
use crackband_core::cheb::chebyshev_mass;
use crackband_core::green::bloch_trace;
use crackband_core::pencil::{band_sweep, BandEntry, BandTable, DispersionPoint, Method, DEFAULT_ORDER};
use crackband_core::{CellSpec, Error, ModeIndex};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const MODE: ModeIndex = ModeIndex::new(1, 0);

fn cell(epsilon: f64) -> CellSpec {
    CellSpec::new(1.4, epsilon, MODE).unwrap()
}

fn decades(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 10f64.powi(-k)).collect()
}

#[test]
fn scaled_inner_product_converges_at_the_inverse_log_rate() {
    for &(mode, theta) in &[(MODE, 0.0), (MODE, 2.0), (ModeIndex::new(1, 2), 1.0)] {
        let c = cell(1e-2).with_mode(mode);
        let target = bloch_trace(1.4, mode, theta, 0.0).norm_sqr();
        let eps = decades(2, 12);
        let dev: Vec<f64> = eps
            .iter()
            .map(|&e| (prop2_inner(&c, theta, e, mode, 32).unwrap().re * e.ln() - target).abs())
            .collect();
        for k in 0..dev.len() - 1 {
            assert!(dev[k + 1] < dev[k], "{mode} theta {theta}: {dev:?}");
            let ratio = dev[k] / dev[k + 1];
            let expected = eps[k + 1].ln() / eps[k].ln();
            assert!(ratio / expected > 0.5 && ratio / expected < 2.0, "step {k}: {ratio} vs {expected}");
        }
    }
}

/// `D^-1/2 Q D^1/2` for a Haar-like unitary `Q`, so the weighted norm is one.
fn weighted_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let q = g.qr().q();
    DMatrix::from_fn(n, n, |j, k| q[(j, k)] * (chebyshev_mass(k) / chebyshev_mass(j)).sqrt())
}

#[test]
fn bound_probe_is_uniform_over_random_unitaries() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let theta = 0.6;
    let target = bloch_trace(1.4, MODE, theta, 0.0).norm_sqr();
    let eps = decades(2, 10);
    for _ in 0..20 {
        let b = weighted_unitary(n, &mut rng);
        assert!((weighted_operator_norm(&b) - 1.0).abs() < 1e-12);
        let probes: Vec<f64> =
            eps.iter().map(|&e| prop2_bound_probe(&cell(1e-2), theta, e, MODE, n, &b).unwrap()).collect();
        assert!(probes.iter().all(|p| p.is_finite() && *p <= target * (1.0 + 1e-12)), "{probes:?}");
        let max = probes.iter().cloned().fold(0.0, f64::max);
        let min = probes.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max <= 1.5 * min, "{probes:?}");
    }
}

#[test]
fn bound_probe_special_operators() {
    let n = 12;
    for &e in &decades(2, 10) {
        let id = DMatrix::<Complex64>::identity(n, n);
        let probe = prop2_bound_probe(&cell(1e-2), 0.0, e, MODE, n, &id).unwrap();
        let direct = prop2_inner(&cell(1e-2), 0.0, e, MODE, n).unwrap().norm() * e.ln().abs();
        assert!((probe - direct).abs() < 1e-12 * direct);
        let zero = DMatrix::<Complex64>::zeros(n, n);
        assert_eq!(prop2_bound_probe(&cell(1e-2), 0.0, e, MODE, n, &zero).unwrap(), 0.0);
    }
    assert!(prop2_bound_probe(&cell(1e-2), 0.0, 1e-3, MODE, n, &DMatrix::zeros(3, 3)).is_err());
}

fn synthetic_band(c1: f64, c2: f64, epsilons: &[f64], theta: f64) -> BandTable {
    let c = cell(1e-2);
    let e = c.eigenvalue(MODE);
    let entries = epsilons
        .iter()
        .map(|&eps| {
            let x = 1.0 / eps.ln().abs();
            BandEntry {
                theta,
                epsilon: eps,
                method: Method::Root,
                e_asymptotic: theorem_shift(&c, MODE, theta, eps),
                outcome: Ok(DispersionPoint {
                    theta,
                    epsilon: eps,
                    e_numeric: e + c1 * x + c2 * x * x,
                    method: Method::Root,
                    residual: 0.0,
                    iterations: 0,
                }),
            }
        })
        .collect();
    BandTable { height: 1.4, mode: MODE, entries }
}

#[test]
fn fit_needs_four_windows() {
    let band = synthetic_band(1.0, 1.0, &decades(4, 6), 0.0);
    assert!(matches!(fit_leading_coefficient(&band, 0.0), Err(Error::InsufficientData(_))));
    // entries at another theta do not count
    assert!(matches!(fit_leading_coefficient(&band, 1.0), Err(Error::InsufficientData(_))));
}

#[test]
fn second_term_improves_the_fit_on_computed_bands() {
    let eps = decades(4, 10);
    let band = band_sweep(&cell(1e-4), &eps, MODE, &[0.0, PI / 2.0], DEFAULT_ORDER, &[Method::Root]);
    assert_eq!(band.failures(), 0);
    for &theta in &[0.0, PI / 2.0] {
        let two = fit_leading_coefficient(&band, theta).unwrap();
        let one = fit_one_term_coefficient(&band, theta).unwrap();
        assert_eq!(two.samples, eps.len());
        assert!(two.rms < one.rms, "theta {theta}: {} vs {}", two.rms, one.rms);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthetic_model_is_recovered(c1 in -20.0f64..20.0, c2 in -50.0f64..50.0, theta in 0.0..2.0 * PI) {
        let band = synthetic_band(c1, c2, &decades(4, 10), theta);
        let fit = fit_leading_coefficient(&band, theta).unwrap();
        prop_assert!((fit.c1 - c1).abs() < 1e-10 * c1.abs().max(1.0));
        prop_assert!((fit.c2 - c2).abs() < 1e-10 * c2.abs().max(1.0));
        prop_assert!(fit.rms < 1e-12);
    }

    #[test]
    fn shift_coefficient_is_affine_in_cos_theta(
        m in 0u32..5,
        n in 0u32..5,
        height in 0.5f64..5.0,
        theta in 0.0..2.0 * PI,
    ) {
        let mode = ModeIndex::new(m, n);
        let c = CellSpec::new(height, 0.01, mode).unwrap();
        let p = AsymptoticPrediction::new(&c, mode);
        let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
        let affine = p.u_a0 * p.u_a0 * (2.0 - 2.0 * parity * theta.cos());
        prop_assert!((p.junction_jump(theta) - affine).abs() < 1e-12 * affine.max(1.0));
        prop_assert!(p.shift_coefficient(theta) >= 0.0);
        prop_assert!((p.shift_coefficient(theta) - p.shift_coefficient(2.0 * PI - theta)).abs() < 1e-12);
        let eps = 1e-6;
        let delta = theorem_shift(&c, mode, theta, eps) - c.eigenvalue(mode);
        let consistent = consistent_shift(&c, mode, theta, eps) - c.eigenvalue(mode);
        prop_assert!((delta * CONSISTENT_CONSTANT - consistent * STATED_CONSTANT).abs() < 1e-12 * delta.abs().max(1.0));
    }

    #[test]
    fn two_inverse_routes_give_one_inner_product(theta in 0.0..2.0 * PI, log_eps in -12.0f64..-2.0, n in 0u32..3) {
        let mode = ModeIndex::new(1, n);
        let c = cell(1e-2).with_mode(mode);
        let eps = 10f64.powf(log_eps);
        let a = prop2_inner(&c, theta, eps, mode, 32).unwrap();
        let b = prop2_inner_soehngen(&c, theta, eps, mode, 32).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * a.norm().max(1.0), "{} vs {}", a, b);
    }
}
