//! Shared fixtures for the benchmarks.

use homog_core::grid::{Field, GridSpec};
use homog_core::random_field::{scaled_potential, AlphaRule, FieldSample};
use homog_core::spectrum::PowerSpectrum;

/// A 1-d grid, a Gaussian initial condition and one scaled potential draw.
pub fn problem(points: usize, eps: f64, m: f64) -> (GridSpec, Field, FieldSample) {
    let grid = GridSpec::new(1, points, 8.0).expect("valid grid");
    let u0 = Field::gaussian_bump(grid, 1.0, 1.0);
    let pot = scaled_potential(
        &PowerSpectrum::gaussian(0.005, 10.0),
        &grid,
        eps,
        AlphaRule::Order { m },
        1,
    )
    .expect("resolved potential");
    (grid, u0, pot)
}
