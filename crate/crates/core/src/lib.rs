//! Finite-horizon dynamic pricing for two markets sharing one inventory pool.
//!
//! An on-site market is served from stock immediately; a long-distance market
//! is shipped one period later. Prices are chosen through the mean demand they
//! induce. [`dp::solve`] runs backward induction on an inventory grid,
//! [`structure`] extracts thresholds and market-preference facts from the
//! result, [`simulator`] replays the policy forward, and [`verify`] runs the
//! full battery of structural checks.

pub mod config;
pub mod dp;
pub mod error;
pub mod export;
pub mod grid;
pub mod model;
pub mod optimize;
pub mod parallel;
pub mod quadrature;
pub mod simulator;
pub mod structure;
pub mod verify;

pub use config::{example1, SpecFile};
pub use dp::{solve, Solution, SolverOptions, TIE_TOL};
pub use error::{Error, Result};
pub use grid::{InventoryGrid, PiecewiseLinear};
pub use model::{validate, Market, ProblemSpec, ValidationReport};
