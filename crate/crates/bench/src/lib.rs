// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use fracbump::ground_state::{compute_ground_state, GroundState, GroundStateOptions};
use fracbump::{FractionalOrder, GridSpec, RealField};

pub fn half() -> FractionalOrder {
    FractionalOrder::new(0.5).unwrap()
}

pub fn gaussian(dimension: usize, points: usize) -> RealField {
    let g = GridSpec::new(dimension, 10.0, points).unwrap();
    RealField::from_fn(g, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp())
}

/// `N = 2`, `s = 1/2`, `p = 2` on a coarse box.
pub fn desk_ground_state(points: usize) -> GroundState {
    let g = GridSpec::new(2, 12.0, points).unwrap();
    compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap()
}
