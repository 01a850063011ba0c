//! Single-price variant: both markets charge the same price `p` each period.
//!
//! `J^u_t(I, p) = p (d_s(p) + d_l(p)) - E H(I + q_t - eps_s d_s(p))
//!               + alpha E V^u_{t+1}(I + q_t - eps_s d_s(p) - eps_l d_l(p))`
//! with its own value function `V^u`. Among equally good prices the highest
//! one (smallest total demand) is kept.

use serde::{Deserialize, Serialize};

use crate::dp::{Continuation, SolverOptions, Stage, TIE_TOL};
use crate::error::{Error, Result};
use crate::grid::{InventoryGrid, PiecewiseLinear};
use crate::model::{validate, DemandForm, Market, ProblemSpec, RevenueCurve};
use crate::optimize::maximize_interval;
use crate::parallel::map_indices;
use crate::quadrature::StageNoise;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnifiedSolution {
    pub grid: InventoryGrid,
    /// `values[t - 1]` holds `V^u_t`.
    pub values: Vec<PiecewiseLinear>,
    /// `prices[t - 1][k]` is `p^u_t` at grid point `k`.
    pub prices: Vec<Vec<f64>>,
    /// Price ceiling shared by both markets, per period.
    pub p_upper: Vec<f64>,
    /// Last grid point where both markets stay closed, per period.
    pub i_u_star: Vec<Option<f64>>,
}

impl UnifiedSolution {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Largest increase of `p^u_t` between adjacent grid points.
    pub fn max_price_increase(&self, t: usize) -> f64 {
        self.prices[t - 1]
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

fn demand(curve: &RevenueCurve, p: f64) -> f64 {
    if curve.d_upper <= curve.d_lower {
        return curve.d_lower;
    }
    curve.demand_at_price(p).clamp(curve.d_lower, curve.d_upper)
}

fn is_degenerate(curve: &RevenueCurve) -> bool {
    curve.d_upper <= curve.d_lower
}

/// Checks the instance for the single-price model. A market with zero
/// demand cap is allowed and simply never sells.
fn check(spec: &ProblemSpec) -> Result<()> {
    let mut relevant = validate(spec);
    relevant.issues.retain(|issue| {
        !spec.periods.iter().any(|p| {
            Market::BOTH.iter().any(|&m| {
                is_degenerate(p.curve(m))
                    && (issue.code.starts_with(&format!("curve.{}", m.short()))
                        || issue.code.starts_with("assumption1"))
            })
        })
    });
    relevant.into_result()?;
    for (idx, p) in spec.periods.iter().enumerate() {
        for m in Market::BOTH {
            if !matches!(p.curve(m).form, DemandForm::Linear { .. }) {
                return Err(Error::Hypothesis(format!(
                    "period {}: {m} demand must be linear",
                    idx + 1
                )));
            }
        }
        let (s, l) = (&p.on_site, &p.long_distance);
        if !is_degenerate(s) && !is_degenerate(l) && (s.p_upper - l.p_upper).abs() > 1e-12 {
            return Err(Error::Hypothesis(format!(
                "period {}: markets must share the price ceiling",
                idx + 1
            )));
        }
    }
    Ok(())
}

fn price_range(spec: &ProblemSpec, t: usize) -> (f64, f64) {
    let p = spec.period(t);
    let live: Vec<&RevenueCurve> = Market::BOTH
        .iter()
        .map(|&m| p.curve(m))
        .filter(|c| !is_degenerate(c))
        .collect();
    let lo = live
        .iter()
        .map(|c| c.p_lower)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = live.iter().map(|c| c.p_upper).fold(f64::INFINITY, f64::min);
    (lo, hi)
}

pub fn solve_unified(
    spec: &ProblemSpec,
    grid: &InventoryGrid,
    opts: &SolverOptions,
) -> Result<UnifiedSolution> {
    check(spec)?;
    let horizon = spec.horizon();
    let mut values: Vec<Option<PiecewiseLinear>> = vec![None; horizon];
    let mut prices = vec![Vec::new(); horizon];
    let mut p_upper = vec![0.0; horizon];
    let mut i_u_star = vec![None; horizon];
    for t in (1..=horizon).rev() {
        let period = spec.period(t);
        let noise = StageNoise::for_period(period, opts.nodes)?;
        let next = if t == horizon {
            Continuation::Terminal(spec.costs.emergency)
        } else {
            Continuation::Table(values[t].as_ref().expect("later period solved first"))
        };
        let close_long = spec.forced_closed(t, Market::LongDistance);
        let stage = Stage {
            period,
            costs: &spec.costs,
            noise: &noise,
            next,
            close_long,
        };
        let (p_lo, p_hi) = price_range(spec, t);
        if !(p_lo <= p_hi) {
            return Err(Error::Hypothesis(format!(
                "period {t}: empty common price range"
            )));
        }
        let demands = |p: f64| {
            let d_s = demand(&period.on_site, p);
            let d_l = if close_long {
                0.0
            } else {
                demand(&period.long_distance, p)
            };
            (d_s, d_l)
        };
        let objective = |inventory: f64, p: f64| {
            let (d_s, d_l) = demands(p);
            p * (d_s + d_l) + stage.inventory_terms(inventory, d_s, d_l)
        };
        // maximizing over -p sends ties to the highest price
        let best: Vec<(f64, f64)> = map_indices(grid.len(), opts.parallel, |k| {
            let inventory = grid.point(k);
            let (x, v) =
                maximize_interval(|x| objective(inventory, -x), -p_hi, -p_lo, &opts.search);
            (-x, v)
        });
        let closed_last = (0..grid.len()).rev().find(|&k| {
            let (d_s, d_l) = demands(best[k].0);
            d_s + d_l <= TIE_TOL
        });
        i_u_star[t - 1] = closed_last.map(|k| grid.point(k));
        p_upper[t - 1] = p_hi;
        prices[t - 1] = best.iter().map(|b| b.0).collect();
        values[t - 1] = Some(PiecewiseLinear::new(
            *grid,
            best.iter().map(|b| b.1).collect(),
        ));
    }
    Ok(UnifiedSolution {
        grid: *grid,
        values: values
            .into_iter()
            .map(|v| v.expect("every period solved"))
            .collect(),
        prices,
        p_upper,
        i_u_star,
    })
}
