//! Checks for perfectly correlated multiplicative noise.
//!
//! * Wherever the on-site market is open, `V'_t(I) < R'_s(0)`.
//! * At the last closed inventory before the on-site market opens,
//!   `V'_t <= R'_s(0)` under positive correlation and `V'_t >= R'_s(0)` under
//!   negative correlation.
//! * Under negative correlation the on-site policy is a threshold policy
//!   whose threshold satisfies `V'_t(I*_s) = R'_s(0)`.
//!
//! `V'_t` at a grid point is measured by the secant of the cell to its right,
//! which never exceeds the right derivative of a concave function.

use serde::{Deserialize, Serialize};

use crate::dp::{Solution, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{Correlation, Market};
use crate::quadrature::StageNoise;

use super::thresholds::{market_threshold, MarketThreshold};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub t: usize,
    /// Correlation slope; `None` for independent noise.
    pub a: Option<f64>,
    /// `R'_s(0)`.
    pub opening_marginal: f64,
    /// Open grid points checked for `V' < R'_s(0)`.
    pub open_points: usize,
    /// Open grid points whose right secant is not below `R'_s(0)`.
    pub open_violations: Vec<f64>,
    /// Largest `secant - R'_s(0)` over open points; negative when all pass.
    pub open_margin: f64,
    /// Left and right cell slopes around the last closed node.
    pub boundary_slopes: Option<(f64, f64)>,
    /// Whether the boundary inequality for the sign of `a` holds within `boundary_tol`.
    pub boundary_ok: Option<bool>,
    pub boundary_tol: f64,
    /// On-site threshold with its marginal-condition residual.
    pub threshold: Option<MarketThreshold>,
}

/// Runs the correlated-demand checks on period `t`. `boundary_tol` is
/// relative to `|R'_s(0)|`.
pub fn check_correlated(sol: &Solution, t: usize, boundary_tol: f64) -> Result<CorrelationReport> {
    let spec = &sol.spec;
    if !spec.is_multiplicative_only() {
        return Err(Error::Hypothesis(
            "correlated checks need purely multiplicative noise".into(),
        ));
    }
    let period = spec.period(t);
    let a = match period.noise.correlation {
        Correlation::Independent => None,
        Correlation::PerfectLinear { a } => Some(a),
    };
    let r0 = period.on_site.opening_marginal_revenue();
    let v = sol.value_table(t);
    let ds = &sol.d_s[t - 1];
    let grid = &sol.grid;
    let mut open_violations = Vec::new();
    let mut open_points = 0;
    let mut open_margin = f64::NEG_INFINITY;
    for (k, &d) in ds.iter().enumerate().take(grid.len() - 1) {
        if d > TIE_TOL {
            open_points += 1;
            let gap = v.cell_slope(k) - r0;
            open_margin = open_margin.max(gap);
            if gap >= 0.0 {
                open_violations.push(grid.point(k));
            }
        }
    }
    let tol = boundary_tol * r0.abs();
    let first_open = ds.iter().position(|&d| d > TIE_TOL);
    let boundary_slopes = match first_open {
        Some(k) if k >= 2 => Some((v.cell_slope(k - 2), v.cell_slope(k - 1))),
        _ => None,
    };
    let boundary_ok = match (a, boundary_slopes) {
        (Some(a), Some((_, right))) if a > 0.0 => Some(right <= r0 + tol),
        (Some(a), Some((left, _))) if a < 0.0 => Some(left >= r0 - tol),
        _ => None,
    };
    let threshold = if a.is_none_or(|a| a < 0.0) {
        let noise = StageNoise::for_period(period, sol.nodes)?;
        market_threshold(sol, t, Market::OnSite, &noise)?
    } else {
        None
    };
    Ok(CorrelationReport {
        t,
        a,
        opening_marginal: r0,
        open_points,
        open_violations,
        open_margin,
        boundary_slopes,
        boundary_ok,
        boundary_tol: tol,
        threshold,
    })
}
