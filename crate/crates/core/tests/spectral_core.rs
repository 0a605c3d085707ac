// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use common::{half, oracle_1d, oracle_grid};
use fracbump::grid::{pointwise, Pointwise};
use fracbump::ground_state::{compute_ground_state, GroundStateOptions};
use fracbump::spectral::{forward_transform, frac_laplacian, integrate, inverse_transform, resolvent};
use fracbump::{FractionalOrder, GridSpec, RealField, Spectral};
use proptest::prelude::*;

fn lattice_cos(g: GridSpec, n: &[i64]) -> (RealField, f64) {
    let xi: Vec<f64> = n.iter().map(|&v| PI * v as f64 / g.half_width()).collect();
    let norm2: f64 = xi.iter().map(|v| v * v).sum();
    (RealField::from_fn(g, |x| x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>().cos()), norm2.sqrt())
}

#[test]
fn constant_transforms_to_zero_mode() {
    let g = GridSpec::new(2, 3.0, 16).unwrap();
    let c = forward_transform(&RealField::constant(g, 1.0)).unwrap();
    let coeffs = c.coefficients();
    assert!((coeffs[0].re - g.len() as f64).abs() < 1e-12);
    assert!(coeffs[1..].iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn lattice_cosine_has_two_coefficients() {
    let g = GridSpec::new(1, 5.0, 32).unwrap();
    let (f, _) = lattice_cos(g, &[3]);
    let c = forward_transform(&f).unwrap();
    let big: Vec<usize> = (0..g.len()).filter(|&i| c.coefficients()[i].norm() > 1e-9).collect();
    assert_eq!(big, vec![3, 29]);
    let (a, b) = (c.coefficients()[3], c.coefficients()[29]);
    assert!((a - b.conj()).norm() < 1e-12);
    assert!(c.conjugate_symmetry_defect() < 1e-12);
}

#[test]
fn random_round_trip() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let g = GridSpec::new(2, 4.0, 64).unwrap();
    let f = RealField::from_fn(g, |_| rng.gen_range(-1.0..1.0));
    let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
    assert!((&back - &f).max_abs() <= 1e-12);
}

#[test]
fn nonfinite_input_rejected() {
    let g = GridSpec::new(1, 1.0, 8).unwrap();
    let mut f = RealField::zeros(g);
    f.samples_mut()[2] = f64::NAN;
    assert!(forward_transform(&f).is_err());
}

#[test]
fn frac_laplacian_of_constant_vanishes() {
    let g = GridSpec::new(2, 6.0, 32).unwrap();
    let out = frac_laplacian(&RealField::constant(g, 3.5), half());
    assert!(out.max_abs() < 1e-12);
}

#[test]
fn frac_laplacian_acts_diagonally_on_modes() {
    let g = GridSpec::new(2, 6.0, 32).unwrap();
    for s in [0.25, 0.5, 0.9] {
        let s = FractionalOrder::new(s).unwrap();
        let (f, xi) = lattice_cos(g, &[2, -5]);
        let out = frac_laplacian(&f, s);
        let want = &f * xi.powf(2.0 * s.value());
        assert!((&out - &want).max_abs() < 1e-11);
    }
}

#[test]
fn classical_laplacian_of_gaussian() {
    let g = GridSpec::new(2, 12.0, 256).unwrap();
    let f = RealField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
    let want = RealField::from_fn(g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (2.0 - r2) * (-r2 / 2.0).exp()
    });
    let out = frac_laplacian(&f, FractionalOrder::new(1.0).unwrap());
    let err = (&out - &want).max_abs();
    assert!(err <= 1e-6, "max error {err}");
}

#[test]
fn resolvent_of_zero_and_modes() {
    let g = GridSpec::new(1, 4.0, 64).unwrap();
    assert!(resolvent(&RealField::zeros(g), half(), 1.0).unwrap().max_abs() == 0.0);
    let (f, xi) = lattice_cos(g, &[7]);
    let out = resolvent(&f, half(), 2.5).unwrap();
    let want = &f * (1.0 / (xi + 2.5));
    assert!((&out - &want).max_abs() < 1e-13);
    assert!(resolvent(&f, half(), 0.0).is_err());
    assert!(resolvent(&f, half(), -1.0).is_err());
}

#[test]
fn resolvent_inverts_ground_state_operator() {
    let g = GridSpec::new(2, 12.0, 256).unwrap();
    let gs = compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap();
    let w = &gs.profile;
    let lw = &frac_laplacian(w, half()) + w;
    let back = resolvent(&lw, half(), 1.0).unwrap();
    let err = (&back - w).max_abs();
    assert!(err <= 1e-10, "round trip error {err}");
}

#[test]
fn integrate_examples() {
    for m in [8, 34, 128] {
        let g = GridSpec::new(2, 10.0, m).unwrap();
        assert!((integrate(&RealField::constant(g, 1.0)) - 400.0).abs() < 1e-9);
    }
    let g = GridSpec::new(2, 12.0, 128).unwrap();
    let gauss = RealField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    assert!((integrate(&gauss) - PI).abs() < 1e-8);
    let w = oracle_1d(oracle_grid());
    let iw2 = integrate(&(&w * &w));
    assert!((iw2 - 2.0 * PI).abs() < 1e-3, "{iw2}");
}

#[test]
fn pointwise_examples() {
    let g = GridSpec::new(1, 3.0, 16).unwrap();
    let neg = RealField::constant(g, -1.0);
    assert_eq!(pointwise(&neg, &neg, Pointwise::PositivePart).unwrap().max_abs(), 0.0);
    let w = oracle_1d(g);
    assert!((&pointwise(&w, &w, Pointwise::Pow(1.0)).unwrap() - &w).max_abs() < 1e-15);
    // Taylor remainder (W+φ)₊ᵖ − Wᵖ − pW^{p−1}φ at φ = 0
    let p = 2.0;
    let phi = RealField::zeros(g);
    let wp = pointwise(&w, &w, Pointwise::Pow(p)).unwrap();
    let up = pointwise(&(&w + &phi), &w, Pointwise::Pow(p)).unwrap();
    let lin = &(&pointwise(&w, &w, Pointwise::Pow(p - 1.0)).unwrap() * &phi) * p;
    assert_eq!((&(&up - &wp) - &lin).max_abs(), 0.0);
    let other = RealField::zeros(GridSpec::new(1, 3.0, 32).unwrap());
    assert!(pointwise(&w, &other, Pointwise::Add).is_err());
    let sum = pointwise(&w, &neg, Pointwise::Add).unwrap();
    assert!((sum.samples()[8] - (w.samples()[8] - 1.0)).abs() < 1e-15);
}

fn small_grid() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (1.0f64..8.0, prop::sample::select(vec![16usize, 32, 64])).prop_map(|(l, m)| GridSpec::new(1, l, m).unwrap()),
        (1.0f64..8.0, prop::sample::select(vec![8usize, 16])).prop_map(|(l, m)| GridSpec::new(2, l, m).unwrap()),
        (1.0f64..8.0).prop_map(|l| GridSpec::new(3, l, 8).unwrap()),
    ]
}

fn field_on(g: GridSpec, seed: u64, nonneg: bool) -> RealField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lo = if nonneg { 0.0 } else { -1.0 };
    RealField::from_fn(g, |_| rng.gen_range(lo..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multiplier_consistency(g in small_grid(), s in 0.05f64..=1.0, mass in 0.1f64..5.0, seed in any::<u64>()) {
        let s = FractionalOrder::new(s).unwrap();
        let m = g.points_per_axis() as i64;
        let n: Vec<i64> = (0..g.dimension()).map(|i| ((seed >> (8 * i)) as i64).rem_euclid(m / 2)).collect();
        let (f, xi) = lattice_cos(g, &n);
        let out = resolvent(&frac_laplacian(&f, s), s, mass).unwrap();
        let sym = xi.powf(2.0 * s.value());
        let want = &f * (sym / (sym + mass));
        prop_assert!((&out - &want).max_abs() < 1e-12);
    }

    #[test]
    fn self_adjoint(g in small_grid(), s in 0.05f64..=1.0, a in any::<u64>(), b in any::<u64>()) {
        let s = FractionalOrder::new(s).unwrap();
        let (f, h) = (field_on(g, a, false), field_on(g, b, false));
        let lhs = integrate(&(&f * &frac_laplacian(&h, s)));
        let rhs = integrate(&(&h * &frac_laplacian(&f, s)));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300));
    }

    #[test]
    fn resolvent_positive_on_nonnegative_data(g in small_grid(), s in 0.05f64..=1.0, mass in 0.1f64..5.0, seed in any::<u64>()) {
        let s = FractionalOrder::new(s).unwrap();
        let data = field_on(g, seed, true);
        let out = resolvent(&data, s, mass).unwrap();
        prop_assert!(out.min() >= -1e-8 * data.max_abs(), "min {}", out.min());
    }

    #[test]
    fn parseval(g in small_grid(), seed in any::<u64>()) {
        let f = field_on(g, seed, false);
        let ctx = Spectral::new(g);
        let c = ctx.forward_transform(&f).unwrap();
        let spectral: f64 = c.coefficients().iter().map(|z| z.norm_sqr()).sum::<f64>() * ctx.parseval_weight();
        let direct = integrate(&(&f * &f));
        prop_assert!((spectral - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn round_trip(g in small_grid(), seed in any::<u64>()) {
        let f = field_on(g, seed, false);
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        prop_assert!((&back - &f).max_abs() <= 1e-12);
    }
}
