mod support;

use std::f64::consts::TAU;

use proptest::prelude::*;
use qlink_core::phase::*;
use support::*;

fn point(x: f64, v: f64, sigma: f64) -> VisibilityPoint {
    VisibilityPoint {
        pump_phase: x,
        visibility: v,
        sigma,
    }
}

fn scan(v0: f64, phi0: f64, phases: &[f64]) -> Vec<VisibilityPoint> {
    phases.iter().map(|&x| point(x, v0 * (x - phi0).cos(), 0.05)).collect()
}

/// Three phases at least 0.4 rad apart modulo π.
fn phases() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, 3..8).prop_filter("phases congruent modulo π", |xs| {
        xs.iter().any(|&a| {
            xs.iter().any(|&b| {
                let d = (a - b).rem_euclid(std::f64::consts::PI);
                d > 0.4 && d < std::f64::consts::PI - 0.4
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn noiseless_recovery(v0 in 0.05..1.0f64, phi0 in 0.0..TAU, xs in phases()) {
        let fit = fit_cosine(&scan(v0, phi0, &xs)).unwrap();
        prop_assert!((fit.v0 - v0).abs() < 1e-9);
        prop_assert!(angle_distance(fit.phi0, phi0) < 1e-9);
        prop_assert!((0.0..TAU).contains(&fit.phi0));
        prop_assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn shift_equivariance(v0 in 0.05..1.0f64, phi0 in 0.0..TAU, xs in phases(), delta in -10.0..10.0f64, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts: Vec<_> = scan(v0, phi0, &xs)
            .into_iter()
            .map(|p| point(p.pump_phase, (p.visibility + gaussian(&mut r, 0.03)).clamp(-1.0, 1.0), 0.05))
            .collect();
        let shifted: Vec<_> = pts.iter().map(|p| point(p.pump_phase + delta, p.visibility, p.sigma)).collect();
        let a = fit_cosine(&pts).unwrap();
        let b = fit_cosine(&shifted).unwrap();
        prop_assert!((a.v0 - b.v0).abs() < 1e-9);
        prop_assert!(angle_distance(a.phi0 + delta, b.phi0) < 1e-9);
    }
}

#[test]
fn agrees_with_grid_search() {
    let mut r = rng(5);
    for _ in 0..20 {
        let v0 = 0.5 + 0.4 * rand::Rng::random::<f64>(&mut r);
        let phi0 = TAU * rand::Rng::random::<f64>(&mut r);
        let pts: Vec<_> = [0.3, 1.5, 2.9, 4.4]
            .iter()
            .map(|&x| {
                point(
                    x,
                    (v0 * (x - phi0).cos() + gaussian(&mut r, 0.05)).clamp(-1.0, 1.0),
                    0.05,
                )
            })
            .collect();
        let fit = fit_cosine(&pts).unwrap();
        let triples: Vec<_> = pts.iter().map(|p| (p.pump_phase, p.visibility, p.sigma)).collect();
        let (gv, gp) = grid_search_cosine(&triples, 0.002, 0.002);
        assert!((fit.v0 - gv).abs() <= 0.002, "{} vs {gv}", fit.v0);
        assert!(angle_distance(fit.phi0, gp) <= 0.004, "{} vs {gp}", fit.phi0);
    }
}

#[test]
fn error_bars_are_calibrated() {
    // φ₀ = π/6 keeps every expected |V| ≤ 0.73, five σ inside the |V| ≤ 1 domain
    let (v0, phi0, sigma) = (0.84, TAU / 12.0, 0.05);
    let xs = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
    let mut r = rng(11);
    let mut v_fits = Vec::new();
    let mut phi_fits = Vec::new();
    let mut reported = (0.0, 0.0);
    for _ in 0..10_000 {
        let pts: Vec<_> = xs
            .iter()
            .map(|&x| point(x, v0 * (x - phi0).cos() + gaussian(&mut r, sigma), sigma))
            .collect();
        let fit = fit_cosine(&pts).unwrap();
        v_fits.push(fit.v0);
        phi_fits.push(fit.phi0);
        reported = (fit.v0_sigma(), fit.phi0_sigma());
    }
    let v_std = std_dev(&v_fits);
    assert!((v_std / reported.0 - 1.0).abs() < 0.15, "{v_std} vs {}", reported.0);
    let phi_std = std_dev(&phi_fits);
    assert!((phi_std / reported.1 - 1.0).abs() < 0.15, "{phi_std} vs {}", reported.1);
}
