//! Monotonicity of the optimal policy in inventory and in replenishment.
//!
//! With `eps_s = 1` the on-site intensity, the post-sale level `I - d*_s`
//! and the long-distance intensity are all non-decreasing in `I`, and both
//! intensities are non-decreasing in `q_t`. With `eps_l = 1` both
//! intensities are non-decreasing in `I`. In general at least one of the two
//! intensities rises with `I`.

use serde::{Deserialize, Serialize};

use crate::dp::{solve, Solution, SolverOptions, TIE_TOL};
use crate::error::Result;
use crate::grid::InventoryGrid;
use crate::model::ProblemSpec;

/// Left grid points of adjacent pairs where `v` drops by more than `tol`.
pub fn decreases(grid: &InventoryGrid, v: &[f64], tol: f64) -> Vec<f64> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - tol)
        .map(|(k, _)| grid.point(k))
        .collect()
}

/// Grid points that are strict local maxima of `v` by more than `tol` on both sides.
pub fn local_maxima(grid: &InventoryGrid, v: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1;
    while k + 1 < v.len() {
        // plateaus count once, at their left end
        let mut j = k;
        while j + 1 < v.len() && (v[j + 1] - v[k]).abs() <= tol {
            j += 1;
        }
        if j + 1 < v.len() && v[k] > v[k - 1] + tol && v[k] > v[j + 1] + tol {
            out.push(grid.point(k));
        }
        k = j + 1;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InventoryMonotonicity {
    pub t: usize,
    /// Drops of `d*_s`.
    pub on_site: Vec<f64>,
    /// Drops of `I - d*_s`, i.e. increments of `d*_s` above one step.
    pub post_sale: Vec<f64>,
    /// Drops of `d*_l`.
    pub long_distance: Vec<f64>,
    /// Pairs where both intensities drop.
    pub both: Vec<f64>,
}

pub fn inventory_monotonicity(sol: &Solution, t: usize) -> InventoryMonotonicity {
    let g = &sol.grid;
    let (ds, dl) = (&sol.d_s[t - 1], &sol.d_l[t - 1]);
    let post: Vec<f64> = (0..g.len()).map(|k| g.point(k) - ds[k]).collect();
    let s = decreases(g, ds, TIE_TOL);
    let l = decreases(g, dl, TIE_TOL);
    let both = s.iter().filter(|x| l.contains(x)).copied().collect();
    InventoryMonotonicity {
        t,
        on_site: s,
        post_sale: decreases(g, &post, TIE_TOL),
        long_distance: l,
        both,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplenishmentMonotonicity {
    pub t: usize,
    pub delta: f64,
    /// Grid points where `d*_s` falls after raising `q_t`.
    pub on_site: Vec<f64>,
    pub long_distance: Vec<f64>,
}

/// Re-solves with `q_t + delta` and compares both policies pointwise.
pub fn replenishment_monotonicity(
    sol: &Solution,
    t: usize,
    delta: f64,
    opts: &SolverOptions,
) -> Result<ReplenishmentMonotonicity> {
    let mut spec: ProblemSpec = sol.spec.clone();
    spec.period_mut(t).replenishment += delta;
    let bumped = solve(&spec, &sol.grid, opts)?;
    let g = &sol.grid;
    let drops = |a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..g.len())
            .filter(|&k| b[k] < a[k] - TIE_TOL)
            .map(|k| g.point(k))
            .collect()
    };
    Ok(ReplenishmentMonotonicity {
        t,
        delta,
        on_site: drops(&sol.d_s[t - 1], &bumped.d_s[t - 1]),
        long_distance: drops(&sol.d_l[t - 1], &bumped.d_l[t - 1]),
    })
}
