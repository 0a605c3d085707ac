// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{desk_ground_state, half, oracle_1d, oracle_grid, periodic_oracle_1d};
use fracbump::energy::energy;
use fracbump::ground_state::*;
use fracbump::spectral::integrate;
use fracbump::{Error, FractionalOrder, GridSpec, RealField, Spectral};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn one_dimensional_oracle() {
    let g = oracle_grid();
    let oracle = oracle_1d(g);
    let ctx = Spectral::new(g);
    // 2/(1+x²) itself carries the O(L⁻²) box truncation; its periodic
    // counterpart solves the discrete problem and certifies the pair
    let periodic = periodic_oracle_1d(g);
    let certified = relative_residual(&ctx, &periodic, half(), 2.0);
    assert!(certified <= 1e-6, "oracle residual {certified}");
    assert!((&periodic - &oracle).max_abs() / oracle.max_abs() <= 1e-4);
    let gs = compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap();
    let err = (&gs.profile - &oracle).max_abs() / oracle.max_abs();
    assert!(err <= 1e-3, "relative error {err}");
    assert!((gs.peak() - 2.0).abs() <= 2e-3);
}

#[test]
fn classical_soliton_oracle() {
    let g = GridSpec::new(1, 30.0, 1024).unwrap();
    let one = FractionalOrder::new(1.0).unwrap();
    let sech = RealField::from_fn(g, |x| 2f64.sqrt() / x[0].cosh());
    assert!(relative_residual(&Spectral::new(g), &sech, one, 3.0) <= 1e-8);
    let gs = compute_ground_state(g, one, 3.0, GroundStateOptions::default()).unwrap();
    let err = (&gs.profile - &sech).max_abs();
    assert!(err <= 1e-6, "max error {err}");
    assert!(gs.tail_amplitude().is_nan());
    assert!(gs.radial_profile().is_err());
}

#[test]
fn desk_state_converges() {
    let gs = desk_ground_state();
    assert!(gs.residual <= 1e-9, "residual {}", gs.residual);
    assert!(gs.profile.min() > 0.0);
    assert!(radial_monotonicity_check(&gs.profile));
    assert!(gs.tail_amplitude() > 0.0);
    let ints = gs.integrals;
    assert!(ints.iw2 > 0.0 && ints.iwp1 > 0.0 && ints.idw2 > 0.0);
}

#[test]
fn radial_symmetry_in_the_core() {
    let fine = compute_ground_state(GridSpec::new(2, 20.0, 1024).unwrap(), half(), 2.0, GroundStateOptions::default()).unwrap();
    let d = radial_defect(&fine.profile, 2.0);
    assert!(d <= 1e-8, "defect {d}");
    assert!(d < radial_defect(&desk_ground_state().profile, 2.0));
}

#[test]
fn supercritical_and_bad_options_rejected() {
    assert!((critical_exponent(2, half()) - 3.0).abs() < 1e-15);
    let g = GridSpec::new(2, 10.0, 64).unwrap();
    for p in [3.0, 5.0, 1.0] {
        let err = compute_ground_state(g, half(), p, GroundStateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_) | Error::SupercriticalExponent { .. }), "{err}");
    }
    assert!(check_exponent(1, half(), 50.0).is_ok());
    let opts = GroundStateOptions { damping: 0.0, ..Default::default() };
    assert!(compute_ground_state(g, half(), 2.0, opts).is_err());
    let opts = GroundStateOptions { max_iter: 2, max_newton: 0, ..Default::default() };
    let err = compute_ground_state(g, half(), 2.0, opts).unwrap_err();
    assert!(matches!(err, Error::NoConvergence { .. }), "{err}");
}

#[test]
fn synthetic_tail_recovers_amplitude() {
    let a0 = 3.25;
    for (n, s) in [(1usize, 0.5), (2, 0.5), (2, 0.3)] {
        let s = FractionalOrder::new(s).unwrap();
        let ell = n as f64 + 2.0 * s.value();
        let g = GridSpec::new(n, 40.0, 256).unwrap();
        let f = RealField::from_fn(g, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            a0 * r.powf(-ell)
        });
        let opts = TailFitOptions { periodic_images: false, ..Default::default() };
        let fit = fit_tail_amplitude(&f, s, opts).unwrap();
        assert!((fit.amplitude - a0).abs() <= 1e-10, "{fit:?}");
        assert!((fit.loglog_slope - ell).abs() < 1e-9);
    }
}

#[test]
fn oracle_tail_amplitude_and_exponent() {
    let gs = compute_ground_state(oracle_grid(), half(), 2.0, GroundStateOptions::default()).unwrap();
    assert!((gs.tail.amplitude - 2.0).abs() <= 0.05, "A = {}", gs.tail.amplitude);
    assert!((gs.tail.exponent - 2.0).abs() <= 0.1);
    let desk = desk_ground_state();
    assert!((desk.tail.exponent - 3.0).abs() <= 0.1, "beta = {}", desk.tail.exponent);
}

#[test]
fn unresolved_tail_is_reported() {
    let g = GridSpec::new(1, 40.0, 256).unwrap();
    let f = RealField::from_fn(g, |x| (-x[0].abs()).exp() * (1.0 + 0.5 * (3.0 * x[0]).sin()));
    let err = fit_tail_amplitude(&f, half(), TailFitOptions::default()).unwrap_err();
    assert!(matches!(err, Error::UnresolvedTail { .. }));
}

#[test]
fn monotonicity_examples() {
    let g = GridSpec::new(1, 50.0, 1024).unwrap();
    let oracle = oracle_1d(g);
    assert!(radial_monotonicity_check(&oracle));
    let bumped = RealField::from_fn(g, |x| 2.0 / (1.0 + x[0] * x[0]) + 0.05 * (-(x[0] - 10.0).powi(2)).exp());
    assert!(!radial_monotonicity_check(&bumped));
    let g2 = GridSpec::new(2, 8.0, 64).unwrap();
    let ring = RealField::from_fn(g2, |x| (-(x[0] * x[0] + x[1] * x[1] - 9.0).powi(2)).exp());
    assert!(!radial_monotonicity_check(&ring));
}

#[test]
fn translation_mode_is_in_kernel() {
    let g = GridSpec::new(1, 50.0, 4096).unwrap();
    let gs = compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap();
    assert!(translation_mode_residual(&gs) <= 1e-6);
    let g = GridSpec::new(2, 10.0, 480).unwrap();
    let gs = compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap();
    let r = translation_mode_residual(&gs);
    assert!(r <= 1e-6, "‖L₊∂₁w‖/‖∂₁w‖ = {r}");
}

#[test]
fn one_dimensional_nondegeneracy() {
    let g = GridSpec::new(1, 50.0, 4096).unwrap();
    let gs = compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap();
    let rep = check_nondegeneracy(&gs, 3).unwrap();
    assert_eq!(rep.near_zero_count, 1, "{rep:?}");
    assert!(rep.symmetric_sector_gap >= 1e-2);
}

#[test]
fn nehari_and_energy_identities() {
    let gs = desk_ground_state();
    let ctx = Spectral::new(*gs.grid());
    let w = &gs.profile;
    let ints = gs.integrals;
    let quad = integrate(&(w * &ctx.frac_laplacian(w, gs.s)));
    assert!(rel(quad + ints.iw2, ints.iwp1) <= 1e-8);
    assert!(rel(quadratic_form(&ctx, w, gs.s), quad) <= 1e-12);
    let j1 = energy(&ctx, w, &RealField::constant(*gs.grid(), 1.0), gs.s, gs.p);
    assert!(rel(j1, (0.5 - 1.0 / (gs.p + 1.0)) * ints.iwp1) <= 1e-8);
}

#[test]
fn integrals_stable_under_m_doubling() {
    let coarse = compute_ground_state(GridSpec::new(2, 12.0, 256).unwrap(), half(), 2.0, GroundStateOptions::default()).unwrap();
    let fine = compute_ground_state(GridSpec::new(2, 12.0, 512).unwrap(), half(), 2.0, GroundStateOptions::default()).unwrap();
    let (a, b) = (coarse.integrals, fine.integrals);
    for (x, y) in [(a.iw2, b.iw2), (a.iwp1, b.iwp1), (a.iwp, b.iwp)] {
        assert!(rel(x, y) <= 1e-6, "{x} vs {y}");
    }
}

#[test]
fn profile_round_trip_keeps_diagnostics() {
    let gs = desk_ground_state();
    let again = GroundState::from_profile(gs.profile.clone(), gs.s, gs.p).unwrap();
    assert_eq!(again.integrals, gs.integrals);
    assert!((again.tail.amplitude - gs.tail.amplitude).abs() < 1e-12);
    let prof = gs.radial_profile().unwrap();
    // the tables drop the periodic images of the tail
    let shift = gs.peak() - prof.value(0.0);
    assert!(shift > 0.0 && shift < gs.truncation_estimate(), "{shift}");
    assert!(prof.derivative(1.0) < 0.0);
    // far beyond the box the table continues the fitted tail
    let far = prof.value(200.0) * 200f64.powi(3);
    assert!((far - gs.tail.amplitude).abs() < 0.02 * gs.tail.amplitude);
}
