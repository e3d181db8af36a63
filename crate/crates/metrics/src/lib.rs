//! Quantitative comparison of generated samples against analytic
//! references: transport distances, grid divergences, per-boundary
//! trajectory-marginal checks, and mode coverage.
//!
//! Every "matches the reference" statement here is relative to a matched
//! sampling floor — the value the metric takes on fresh exact draws of the
//! same size — so thresholds transfer across sample counts.  All functions
//! are pure over immutable sample buffers and deterministic given the
//! caller's RNG.

mod error;
mod grid;
mod modes;
mod report;
mod sw;
mod trajectory;

pub use error::{MetricsError, Result};
pub use grid::{
    exact_diffused_samples, grid_kl_floor, grid_kl_vs_analytic, GridKlReport, GridSpec,
    DEFAULT_GRID_RESOLUTION, GRID_STD_SPAN,
};
pub use modes::{mode_coverage, ModeCoverage, COVERAGE_SHARE, DEFAULT_MODE_RADIUS_STD};
pub use report::MetricReport;
pub use sw::sliced_wasserstein;
pub use trajectory::{trajectory_marginal_distance, BoundaryDistance, MIN_TRAJECTORIES};
