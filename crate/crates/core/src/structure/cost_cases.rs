//! Special cases with identical markets and one or both of `c_p`, `c_h` zero.
//!
//! * both zero: the two thresholds coincide;
//! * `c_p = 0`: `I*_s <= I*_l` and `d*_s >= d*_l`;
//! * `c_h = 0`: `I*_s >= I*_l` and `d*_s <= d*_l`.

use serde::{Deserialize, Serialize};

use crate::dp::{Solution, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{Market, ProblemSpec};
use crate::quadrature::StageNoise;

use super::crossing::identical_markets;
use super::thresholds::market_threshold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostCase {
    /// `c_p = c_h = 0`.
    NoCosts,
    /// `c_p = 0 < c_h`.
    NoShortage,
    /// `c_h = 0 < c_p`.
    NoHolding,
}

impl CostCase {
    pub const ALL: [CostCase; 3] = [CostCase::NoCosts, CostCase::NoShortage, CostCase::NoHolding];

    pub fn label(self) -> &'static str {
        match self {
            CostCase::NoCosts => "no_costs",
            CostCase::NoShortage => "no_shortage",
            CostCase::NoHolding => "no_holding",
        }
    }
}

/// Copies `base` with the on-site curve and noise used in both markets and
/// the costs of `case`. The emergency cost is raised if needed so the
/// terminal condition still dominates the opening marginal revenue.
pub fn case_spec(base: &ProblemSpec, case: CostCase) -> ProblemSpec {
    let mut spec = base.clone();
    spec.name = format!("{}_{}", base.name, case.label());
    let mut r_max = 0.0f64;
    for p in spec.periods.iter_mut() {
        let mut curve = p.on_site.clone();
        curve.market = Market::LongDistance;
        p.long_distance = curve;
        p.noise.long_distance = p.noise.on_site.clone();
        r_max = r_max.max(p.on_site.opening_marginal_revenue());
    }
    let (c_h, c_p) = (base.costs.holding, base.costs.shortage);
    match case {
        CostCase::NoCosts => {
            spec.costs.holding = 0.0;
            spec.costs.shortage = 0.0;
        }
        CostCase::NoShortage => {
            spec.costs.holding = if c_h > 0.0 { c_h } else { 1.0 };
            spec.costs.shortage = 0.0;
        }
        CostCase::NoHolding => {
            spec.costs.holding = 0.0;
            spec.costs.shortage = if c_p > 0.0 { c_p } else { 1.0 };
        }
    }
    let floor = r_max - spec.costs.shortage;
    if spec.costs.emergency <= floor {
        spec.costs.emergency = floor + 0.5 * r_max;
    }
    spec
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCaseReport {
    pub case: CostCase,
    pub t: usize,
    pub threshold_s: f64,
    pub threshold_l: f64,
    pub threshold_ok: bool,
    /// Grid points where the pointwise order fails by more than `TIE_TOL`.
    pub order_violations: Vec<f64>,
}

impl CostCaseReport {
    pub fn pass(&self) -> bool {
        self.threshold_ok && self.order_violations.is_empty()
    }
}

fn detect_case(spec: &ProblemSpec) -> Result<CostCase> {
    let c = &spec.costs;
    match (c.shortage == 0.0, c.holding == 0.0) {
        (true, true) => Ok(CostCase::NoCosts),
        (true, false) => Ok(CostCase::NoShortage),
        (false, true) => Ok(CostCase::NoHolding),
        (false, false) => Err(Error::Hypothesis("neither c_p nor c_h is zero".into())),
    }
}

/// Checks the case implied by the costs of `sol.spec` in period `t`.
pub fn check_cost_case(sol: &Solution, t: usize) -> Result<CostCaseReport> {
    let spec = &sol.spec;
    let case = detect_case(spec)?;
    identical_markets(spec, t).map_err(Error::Hypothesis)?;
    if spec.forced_closed(t, Market::LongDistance) {
        return Err(Error::Hypothesis(format!(
            "long-distance market is closed in period {t}"
        )));
    }
    let noise = StageNoise::for_period(spec.period(t), sol.nodes)?;
    let s =
        market_threshold(sol, t, Market::OnSite, &noise)?.expect("on-site is never forced closed");
    let l = market_threshold(sol, t, Market::LongDistance, &noise)?.expect("checked above");
    // thresholds compared by their bracketing cells
    let (ks, kl) = (s.first_open as i64, l.first_open as i64);
    let threshold_ok = match case {
        CostCase::NoCosts => (ks - kl).abs() <= 1,
        CostCase::NoShortage => ks <= kl,
        CostCase::NoHolding => ks >= kl,
    };
    let (ds, dl) = (&sol.d_s[t - 1], &sol.d_l[t - 1]);
    let order_violations = (0..sol.grid.len())
        .filter(|&k| match case {
            CostCase::NoCosts => false,
            CostCase::NoShortage => ds[k] < dl[k] - TIE_TOL,
            CostCase::NoHolding => ds[k] > dl[k] + TIE_TOL,
        })
        .map(|k| sol.grid.point(k))
        .collect();
    Ok(CostCaseReport {
        case,
        t,
        threshold_s: s.midpoint,
        threshold_l: l.midpoint,
        threshold_ok,
        order_violations,
    })
}
