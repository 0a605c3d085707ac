// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the integration tests: the desk problem
//! (`N = 2`, `s = 1/2`, `p = 2`, `a = 1`, `m = 1`) and the explicit 1-D profile.
#![allow(dead_code)]

use std::sync::OnceLock;

use fracbump::ansatz::PotentialSpec;
use fracbump::energy::{expansion_coeffs, optimal_radius, ExpansionCoeffs};
use fracbump::ground_state::{compute_ground_state, GroundState, GroundStateOptions, RadialProfile};
use fracbump::reduction::{FixedPointOptions, LinearSolveOptions, ProblemSpec};
use fracbump::{FractionalOrder, GridSpec, RealField};

pub const DESK_L: f64 = 20.0;
pub const DESK_M: usize = 512;
pub const DESK_SPACING: f64 = 1.0 / 12.0;
pub const DESK_MARGIN: f64 = 12.0;
pub const DESK_KS: [usize; 3] = [6, 8, 12];

pub fn half() -> FractionalOrder {
    FractionalOrder::new(0.5).unwrap()
}

pub fn desk_ground_state() -> &'static GroundState {
    static GS: OnceLock<GroundState> = OnceLock::new();
    GS.get_or_init(|| {
        let g = GridSpec::new(2, DESK_L, DESK_M).unwrap();
        compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap()
    })
}

pub fn desk_profile() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| desk_ground_state().radial_profile().unwrap())
}

pub fn desk_coeffs() -> ExpansionCoeffs {
    expansion_coeffs(desk_ground_state(), 1.0).unwrap()
}

pub fn desk_r0(k: usize) -> f64 {
    optimal_radius(k, &desk_coeffs(), 2, half(), 1.0).unwrap()
}

pub fn desk_spec(sigma: f64) -> ProblemSpec {
    ProblemSpec {
        s: half(),
        p: 2.0,
        potential: PotentialSpec::new(1.0, 1.0),
        sigma,
        spacing: DESK_SPACING,
        margin: DESK_MARGIN,
        linear: LinearSolveOptions::default(),
        fixed_point: FixedPointOptions::default(),
    }
}

/// `2/(1+x²)` solves the 1-D problem with `s = 1/2`, `p = 2`.
pub fn oracle_1d(grid: GridSpec) -> RealField {
    RealField::from_fn(grid, |x| 2.0 / (1.0 + x[0] * x[0]))
}

/// The exact solution on the periodic box: `κ sinh a/(cosh a − cos κx)` with
/// `κ = π/L`, `tanh a = κ`. Tends to `2/(1+x²)` as `L → ∞`.
pub fn periodic_oracle_1d(grid: GridSpec) -> RealField {
    let kappa = std::f64::consts::PI / grid.half_width();
    let a = kappa.atanh();
    RealField::from_fn(grid, |x| kappa * a.sinh() / (a.cosh() - (kappa * x[0]).cos()))
}

pub fn oracle_grid() -> GridSpec {
    GridSpec::new(1, 200.0, 8192).unwrap()
}

pub fn max_abs_diff(a: &RealField, b: &RealField) -> f64 {
    (a - b).max_abs()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
