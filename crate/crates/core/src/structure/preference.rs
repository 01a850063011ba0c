//! Which market opens first at low inventory.
//!
//! Two sufficient conditions are checked against the computed thresholds:
//!
//! * `R'_s(0) > R'_l(0) + c_p` implies `I*_s < I*_l`, and
//!   `R'_l(0) > R'_s(0) + c_h` implies `I*_s > I*_l`.
//! * When `(R'_l,t(0) - alpha R'_l,t+1(0)) / alpha > c_p`, the sign of
//!   `R'_s(0) - R'_l(0) - c_p` decides the order.
//!
//! When neither applies the observed order is reported without a verdict.

use serde::{Deserialize, Serialize};

use crate::model::ProblemSpec;

use super::thresholds::{PeriodThresholds, Preference};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVerdict {
    pub t: usize,
    /// Hypotheses that hold, in words.
    pub hypotheses: Vec<String>,
    pub implied: Option<Preference>,
    pub observed: Preference,
    /// `None` when no hypothesis applies.
    pub pass: Option<bool>,
}

/// Orders implied by the marginal-revenue conditions in period `t`, as
/// `(description, implied preference)` pairs.
pub fn implied_orders(spec: &ProblemSpec, t: usize) -> Vec<(String, Preference)> {
    let p = spec.period(t);
    let c = &spec.costs;
    let rs = p.on_site.opening_marginal_revenue();
    let rl = p.long_distance.opening_marginal_revenue();
    let mut out = Vec::new();
    if rs > rl + c.shortage {
        out.push((
            format!("R'_s(0)={rs} > R'_l(0)+c_p={}", rl + c.shortage),
            Preference::OnSiteFirst,
        ));
    }
    if rl > rs + c.holding {
        out.push((
            format!("R'_l(0)={rl} > R'_s(0)+c_h={}", rs + c.holding),
            Preference::LongDistanceFirst,
        ));
    }
    if t < spec.horizon() {
        let rl_next = spec.period(t + 1).long_distance.opening_marginal_revenue();
        let gap = (rl - c.discount * rl_next) / c.discount;
        if gap > c.shortage && rs != rl + c.shortage {
            let pref = if rs > rl + c.shortage {
                Preference::OnSiteFirst
            } else {
                Preference::LongDistanceFirst
            };
            out.push((
                format!(
                    "(R'_l,t(0)-alpha R'_l,t+1(0))/alpha={gap} > c_p={} with R'_s(0) {} R'_l(0)+c_p",
                    c.shortage,
                    if rs > rl + c.shortage { ">" } else { "<" }
                ),
                pref,
            ));
        }
    }
    out
}

/// Compares the implied opening order with the observed one.
pub fn classify_preference(spec: &ProblemSpec, thresholds: &PeriodThresholds) -> PreferenceVerdict {
    let t = thresholds.t;
    let observed = thresholds.preference;
    let orders = implied_orders(spec, t);
    let hypotheses: Vec<String> = orders.iter().map(|(h, _)| h.clone()).collect();
    let both_open = thresholds.on_site.is_some() && thresholds.long_distance.is_some();
    let implied = orders.first().map(|(_, p)| *p);
    let consistent = orders.iter().all(|(_, p)| Some(*p) == implied);
    let pass = match implied {
        Some(p) if both_open && consistent => Some(observed == p),
        _ => None,
    };
    PreferenceVerdict {
        t,
        hypotheses,
        implied,
        observed,
        pass,
    }
}
