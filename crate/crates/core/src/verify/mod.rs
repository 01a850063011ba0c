//! Structural check battery and the brute-force oracle.

pub mod battery;
pub mod brute_force;

pub use battery::{any_failed, run_battery, BatteryOptions, CheckResult, NoiseClass, Status};
pub use brute_force::{brute_force_dp, BruteForceOptions};
