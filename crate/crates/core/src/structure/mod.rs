//! Structural properties of a computed solution: opening thresholds,
//! relaxed benchmark policies, market preference, the single-price variant,
//! correlated noise and monotonicity.

pub mod benchmark;
pub mod correlated;
pub mod cost_cases;
pub mod crossing;
pub mod monotone;
pub mod preference;
pub mod thresholds;
pub mod unified;

pub use benchmark::{solve_benchmark, BenchmarkPolicy};
pub use correlated::{check_correlated, CorrelationReport};
pub use crossing::{preference_crossing, CrossingReport};
pub use preference::{classify_preference, PreferenceVerdict};
pub use thresholds::{
    find_thresholds, MarketThreshold, PeriodThresholds, Preference, ThresholdReport,
};
pub use unified::{solve_unified, UnifiedSolution};
