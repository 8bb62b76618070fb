//! Piecewise coefficients, model assembly and the derived averages.

pub mod config;
pub mod limits;
pub mod model;
pub mod piecewise;
pub mod stats;

pub use config::parse_model;
pub use limits::{LadderLimit, LadderOptions};
pub use model::{
    Hypothesis, HypothesisCheck, LimitOverrides, Model, ModelError, ReducedProblem, Reference,
};
pub use piecewise::{Join, PiecewiseError, PiecewiseFn, JUMP_TOL};
pub use stats::{
    average_extremum, average_stats, average_stats_with, integral_average, range_extremum,
    AverageExtremum,
    AverageStats, Mode, ScanOptions, StatsError,
};
