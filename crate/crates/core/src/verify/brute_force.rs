//! Exhaustive demand-grid dynamic program used as a test oracle.
//!
//! Shares nothing with the main solver except the noise discretization: the
//! stage objective is summed directly over every joint noise outcome and the
//! maximum is found by scanning a demand grid, then rescanning finer grids
//! around the best cell.

use crate::dp::Solution;
use crate::error::{Error, Result};
use crate::grid::{InventoryGrid, PiecewiseLinear};
use crate::model::{Correlation, Market, NoiseRole, ProblemSpec};
use crate::quadrature::discretize;

pub const MAX_STATES: usize = 101;
pub const MAX_DEMAND_POINTS: usize = 201;
pub const MAX_NODES: usize = 7;
pub const MAX_HORIZON: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteForceOptions {
    /// Points per demand axis on the first scan.
    pub demand_points: usize,
    /// Number of 21x21 rescans around the incumbent, each ten times finer.
    pub zoom_levels: usize,
    pub nodes: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            demand_points: MAX_DEMAND_POINTS,
            zoom_levels: 3,
            nodes: 5,
        }
    }
}

/// `(eps_s, eps_l, omega_s, omega_l, weight)` for every joint outcome.
fn outcomes(spec: &ProblemSpec, t: usize, nodes: usize) -> Result<Vec<[f64; 5]>> {
    let noise = &spec.period(t).noise;
    let es = discretize(
        &noise.on_site.multiplicative,
        NoiseRole::Multiplicative,
        nodes,
    )?;
    let el = discretize(
        &noise.long_distance.multiplicative,
        NoiseRole::Multiplicative,
        nodes,
    )?;
    let ws = discretize(&noise.on_site.additive, NoiseRole::Additive, nodes)?;
    let wl = discretize(&noise.long_distance.additive, NoiseRole::Additive, nodes)?;
    let mut eps = Vec::new();
    match noise.correlation {
        Correlation::Independent => {
            for (s, a) in es.nodes.iter().zip(&es.weights) {
                for (l, b) in el.nodes.iter().zip(&el.weights) {
                    eps.push((*s, *l, a * b));
                }
            }
        }
        Correlation::PerfectLinear { a } => {
            for (l, w) in el.nodes.iter().zip(&el.weights) {
                eps.push((1.0 + a * (l - 1.0), *l, *w));
            }
        }
    }
    let mut out = Vec::new();
    for &(s, l, w) in &eps {
        for (os, a) in ws.nodes.iter().zip(&ws.weights) {
            for (ol, b) in wl.nodes.iter().zip(&wl.weights) {
                out.push([s, l, *os, *ol, w * a * b]);
            }
        }
    }
    Ok(out)
}

/// Piecewise-linear interpolation with linear extrapolation from the end cells.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut i = 0;
    while i + 2 < n && x > xs[i + 1] {
        i += 1;
    }
    let f = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + f * (ys[i + 1] - ys[i])
}

pub fn brute_force_dp(
    spec: &ProblemSpec,
    grid: &InventoryGrid,
    opts: &BruteForceOptions,
) -> Result<Solution> {
    if grid.len() > MAX_STATES
        || opts.demand_points > MAX_DEMAND_POINTS
        || opts.nodes > MAX_NODES
        || spec.horizon() > MAX_HORIZON
    {
        return Err(Error::SizeGuard(format!(
            "oracle limited to {MAX_STATES} states, {MAX_DEMAND_POINTS} demand points, {MAX_NODES} nodes, horizon {MAX_HORIZON}"
        )));
    }
    if opts.demand_points < 2 {
        return Err(Error::SizeGuard("need at least two demand points".into()));
    }
    let xs = grid.points();
    let c = spec.costs;
    let horizon = spec.horizon();
    let mut next: Option<Vec<f64>> = None;
    let mut values = vec![Vec::new(); horizon];
    let mut d_s = vec![Vec::new(); horizon];
    let mut d_l = vec![Vec::new(); horizon];
    for t in (1..=horizon).rev() {
        let period = spec.period(t);
        let pairs = outcomes(spec, t, opts.nodes)?;
        let closed_l = spec.last_period_rule && t == horizon;
        let (s, l) = (&period.on_site, &period.long_distance);
        let q = period.replenishment;
        let v_next = |x: f64| match &next {
            None => c.emergency * x.min(0.0),
            Some(v) => interpolate(&xs, v, x),
        };
        let j = |i: f64, a: f64, b: f64| {
            let rev_s = a * s.price_unchecked(a);
            let rev_l = if b == 0.0 {
                0.0
            } else {
                b * l.price_unchecked(b)
            };
            let mut total = rev_s + rev_l;
            for o in &pairs {
                let after_s = i + q - o[0] * a - o[2];
                let h = if after_s >= 0.0 {
                    c.holding * after_s
                } else {
                    -c.shortage * after_s
                };
                let end = after_s - o[1] * b - o[3];
                total += o[4] * (c.discount * v_next(end) - h);
            }
            total
        };
        let (lo_l, hi_l) = if closed_l {
            (0.0, 0.0)
        } else {
            (l.d_lower, l.d_upper)
        };
        let mut vt = Vec::with_capacity(xs.len());
        let mut st = Vec::with_capacity(xs.len());
        let mut lt = Vec::with_capacity(xs.len());
        for &i in &xs {
            let mut box_ = [s.d_lower, s.d_upper, lo_l, hi_l];
            let mut n = opts.demand_points;
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for level in 0..=opts.zoom_levels {
                let step_a = (box_[1] - box_[0]) / (n - 1) as f64;
                let step_b = if box_[3] > box_[2] {
                    (box_[3] - box_[2]) / (n - 1) as f64
                } else {
                    0.0
                };
                let nb = if step_b > 0.0 { n } else { 1 };
                for ia in 0..n {
                    let a = box_[0] + ia as f64 * step_a;
                    for ib in 0..nb {
                        let b = box_[2] + ib as f64 * step_b;
                        let v = j(i, a, b);
                        let scale = 1e-12 * v.abs().max(1.0);
                        let better = v > best.0 + scale
                            || ((v - best.0).abs() <= scale && a + b < best.1 + best.2);
                        if better {
                            best = (v, a, b);
                        }
                    }
                }
                if level == opts.zoom_levels {
                    break;
                }
                box_ = [
                    (best.1 - step_a).max(s.d_lower),
                    (best.1 + step_a).min(s.d_upper),
                    (best.2 - step_b).max(lo_l),
                    (best.2 + step_b).min(hi_l),
                ];
                n = 21;
            }
            vt.push(best.0);
            st.push(best.1);
            lt.push(best.2);
        }
        values[t - 1] = vt.clone();
        d_s[t - 1] = st;
        d_l[t - 1] = lt;
        next = Some(vt);
    }
    Ok(Solution {
        spec: spec.clone(),
        grid: *grid,
        nodes: opts.nodes,
        values: values
            .into_iter()
            .map(|v| PiecewiseLinear::new(*grid, v))
            .collect(),
        d_s,
        d_l,
    })
}

/// Largest absolute policy gap over all periods and markets.
pub fn max_policy_gap(a: &Solution, b: &Solution) -> f64 {
    let mut gap = 0.0f64;
    for t in 1..=a.horizon() {
        for m in Market::BOTH {
            for (x, y) in a.policy(t, m).iter().zip(b.policy(t, m)) {
                gap = gap.max((x - y).abs());
            }
        }
    }
    gap
}

/// Largest absolute value gap and the largest `|V|` of the first solution.
pub fn max_value_gap(a: &Solution, b: &Solution) -> (f64, f64) {
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for t in 1..=a.horizon() {
        for (x, y) in a.values[t - 1].values.iter().zip(&b.values[t - 1].values) {
            gap = gap.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    (gap, scale)
}
