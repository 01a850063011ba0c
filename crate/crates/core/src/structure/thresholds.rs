//! Market-opening thresholds and their marginal conditions.
//!
//! A market's threshold is the inventory level at and below which its optimal
//! intensity is zero. On the grid it lies in the cell between the last closed
//! and the first open node; the reported estimate extrapolates the open-side
//! policy down to zero inside that cell.
//!
//! At a threshold the value function satisfies `V'_t(I*_s) = R'_s(0)` for the
//! on-site market and `V'_t(I*_l) = R'_l(0) - E H'(I*_l + q_t - eps_s d*_s)`
//! for the long-distance market. `V_t` can have a kink exactly there, so the
//! residual is the distance from the target to the interval spanned by the
//! one-sided slopes, each extrapolated from cells that do not contain the
//! threshold.

use serde::{Deserialize, Serialize};

use crate::dp::{Solution, TIE_TOL};
use crate::error::{Error, Result};
use crate::grid::PiecewiseLinear;
use crate::model::Market;
use crate::quadrature::StageNoise;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    OnSiteFirst,
    LongDistanceFirst,
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketThreshold {
    pub market: Market,
    /// Index of the first grid node where the market is open.
    pub first_open: usize,
    /// Midpoint of the bracketing cell.
    pub midpoint: f64,
    /// Zero crossing of the policy extrapolated from the open side.
    pub estimate: f64,
    /// Target slope of the marginal condition.
    pub target: f64,
    /// One-sided slopes of `V_t` at `estimate` (left, right).
    pub slopes: (f64, f64),
    pub residual: f64,
    /// Open nodes below `first_open` or closed nodes above it.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodThresholds {
    pub t: usize,
    pub on_site: Option<MarketThreshold>,
    pub long_distance: Option<MarketThreshold>,
    pub preference: Preference,
}

impl PeriodThresholds {
    pub fn market(&self, m: Market) -> Option<&MarketThreshold> {
        match m {
            Market::OnSite => self.on_site.as_ref(),
            Market::LongDistance => self.long_distance.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub step: f64,
    pub periods: Vec<PeriodThresholds>,
}

impl ThresholdReport {
    pub fn period(&self, t: usize) -> &PeriodThresholds {
        &self.periods[t - 1]
    }
}

/// First node where the policy exceeds `TIE_TOL`, and how many nodes break
/// the closed-below/open-above pattern around it.
pub fn opening_index(policy: &[f64]) -> Option<(usize, usize)> {
    let k = policy.iter().position(|&d| d > TIE_TOL)?;
    let reclosed = policy[k..].iter().filter(|&&d| d <= TIE_TOL).count();
    Some((k, reclosed))
}

/// Zero crossing of the policy, extrapolated from the first open nodes and
/// kept inside the bracketing cell.
pub fn extrapolated_zero(sol: &Solution, policy: &[f64], k: usize) -> f64 {
    let g = &sol.grid;
    let h = g.step;
    let x_k = g.point(k);
    let n = policy.len();
    // least squares over up to three open nodes
    let m = (n - k).min(3);
    let est = if m >= 2 {
        let xs: Vec<f64> = (k..k + m).map(|j| g.point(j)).collect();
        let ys = &policy[k..k + m];
        let mx = xs.iter().sum::<f64>() / m as f64;
        let my = ys.iter().sum::<f64>() / m as f64;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        if slope > 0.0 {
            mx - my / slope
        } else {
            x_k - 0.5 * h
        }
    } else {
        x_k - 0.5 * h
    };
    est.clamp(x_k - h, x_k)
}

/// Slopes of `v` just left and right of `x`, extrapolated from the two
/// nearest cells on each side that do not contain `x`.
pub fn one_sided_slopes(v: &PiecewiseLinear, x: f64) -> Option<(f64, f64)> {
    let g = &v.grid;
    let h = g.step;
    let u = x / h - g.k_min as f64;
    let cell = u.floor() as i64;
    let n_cells = g.len() as i64 - 1;
    if cell < 2 || cell + 2 >= n_cells {
        return None;
    }
    let c = cell as usize;
    let mid = |i: usize| g.point(i) + 0.5 * h;
    let (s1, s2) = (v.cell_slope(c - 1), v.cell_slope(c - 2));
    let left = s1 + (s1 - s2) * (x - mid(c - 1)) / h;
    let (r1, r2) = (v.cell_slope(c + 1), v.cell_slope(c + 2));
    let right = r1 - (r2 - r1) * (mid(c + 1) - x) / h;
    Some((left, right))
}

/// Distance from `target` to the interval spanned by `slopes`.
pub fn interval_residual(slopes: (f64, f64), target: f64) -> f64 {
    let (a, b) = (slopes.0.min(slopes.1), slopes.0.max(slopes.1));
    if target < a {
        a - target
    } else if target > b {
        target - b
    } else {
        0.0
    }
}

/// Threshold of market `m` in period `t`, or `None` when it is forced closed.
pub fn market_threshold(
    sol: &Solution,
    t: usize,
    m: Market,
    noise: &StageNoise,
) -> Result<Option<MarketThreshold>> {
    let spec = &sol.spec;
    if spec.forced_closed(t, m) {
        return Ok(None);
    }
    let policy = sol.policy(t, m);
    let (k, reclosed) = opening_index(policy).ok_or_else(|| {
        Error::Grid(format!(
            "{m} market never opens in period {t}; widen the grid"
        ))
    })?;
    if k == 0 {
        return Err(Error::Grid(format!(
            "{m} market is already open at the grid minimum in period {t}; widen the grid"
        )));
    }
    let estimate = extrapolated_zero(sol, policy, k);
    let v = sol.value_table(t);
    let slopes = one_sided_slopes(v, estimate).ok_or_else(|| {
        Error::Grid(format!(
            "{m} threshold in period {t} too close to the grid edge"
        ))
    })?;
    let period = spec.period(t);
    let target = match m {
        Market::OnSite => period.on_site.opening_marginal_revenue(),
        Market::LongDistance => {
            let stage = sol.stage(t, noise);
            let (d_s, _) = sol.policy_at(t, estimate);
            period.long_distance.opening_marginal_revenue() - stage.holding_slope(estimate, d_s)
        }
    };
    Ok(Some(MarketThreshold {
        market: m,
        first_open: k,
        midpoint: sol.grid.point(k) - 0.5 * sol.grid.step,
        estimate,
        target,
        slopes,
        residual: interval_residual(slopes, target),
        violations: reclosed,
    }))
}

/// Thresholds for every period; requires purely multiplicative noise.
pub fn find_thresholds(sol: &Solution) -> Result<ThresholdReport> {
    let spec = &sol.spec;
    if !spec.is_multiplicative_only() {
        return Err(Error::Hypothesis(
            "thresholds need purely multiplicative noise".into(),
        ));
    }
    let mut periods = Vec::with_capacity(sol.horizon());
    for t in 1..=sol.horizon() {
        let noise = StageNoise::for_period(spec.period(t), sol.nodes)?;
        let on_site = market_threshold(sol, t, Market::OnSite, &noise)?;
        let long_distance = market_threshold(sol, t, Market::LongDistance, &noise)?;
        let preference = preference_of(on_site.as_ref(), long_distance.as_ref(), sol.grid.step);
        periods.push(PeriodThresholds {
            t,
            on_site,
            long_distance,
            preference,
        });
    }
    Ok(ThresholdReport {
        step: sol.grid.step,
        periods,
    })
}

pub fn preference_of(
    s: Option<&MarketThreshold>,
    l: Option<&MarketThreshold>,
    step: f64,
) -> Preference {
    match (s, l) {
        (Some(s), Some(l)) if s.first_open < l.first_open => Preference::OnSiteFirst,
        (Some(s), Some(l)) if l.first_open < s.first_open => Preference::LongDistanceFirst,
        (Some(s), Some(l)) if (s.estimate - l.estimate).abs() > 0.5 * step => {
            if s.estimate < l.estimate {
                Preference::OnSiteFirst
            } else {
                Preference::LongDistanceFirst
            }
        }
        _ => Preference::Ambiguous,
    }
}
