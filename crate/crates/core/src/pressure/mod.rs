//! Brute-force invariance pressure: candidate controls, coverage of a grid
//! over `K`, minimum-weight covers, growth-rate extrapolation and the
//! divergence lower bound.

mod candidates;
mod cover;
mod coverage;
mod estimate;
mod lower;

pub use candidates::{build_candidates, interval_count};
pub use cover::{
    greedy_cover, min_weight_cover, CoverMethod, CoverResult, DEFAULT_EXACT_THRESHOLD,
};
pub use coverage::{coverage_for_points, coverage_map, CoverageMatrix, CoverageOptions};
pub use estimate::{
    estimate_pressure, outer_pressure_series, theorem_bounds, BoundsReport, Discretization,
    PressureOptions, PressureReport, SeriesPoint,
};
pub use lower::{lower_bound, LowerBound, LowerBoundOptions};
