//! Where on-site demand overtakes long-distance demand when both markets
//! are statistically identical.
//!
//! With equal revenue curves, equal noise laws and equal demand caps, the
//! sign of `g(I) = E[eps_s H'(I + q_t - eps_s d*_s(I))]` orders the two
//! intensities: `g <= 0` gives `d*_s <= d*_l` and `g >= 0` gives
//! `d*_s >= d*_l`.

use serde::{Deserialize, Serialize};

use crate::dp::{Solution, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{DemandForm, ProblemSpec};
use crate::quadrature::StageNoise;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub t: usize,
    /// Range of `g` at every grid point. With discrete noise the optimal
    /// on-site intensity often puts one outcome exactly on the kink of `H`,
    /// where `g` is only known up to its subgradient interval.
    pub g: Vec<(f64, f64)>,
    /// Grid points where the sign of `g` contradicts the order of the policies.
    pub violations: Vec<f64>,
    /// Inventory span where the range of `g` contains zero: from the first
    /// grid point whose range reaches zero to the first one entirely above it.
    pub zero_band: Option<(f64, f64)>,
    /// Midpoint of the first cell above which `d*_s >= d*_l` holds for good.
    pub policy_crossing: Option<f64>,
    /// `|g|` below this counts as zero.
    pub band: f64,
}

impl CrossingReport {
    /// Whether the policy crossing lies in the zero band of `g`, with `slack` on each side.
    pub fn crossing_in_band(&self, slack: f64) -> Option<bool> {
        let (a, b) = self.zero_band?;
        let x = self.policy_crossing?;
        Some(x >= a - slack && x <= b + slack)
    }
}

/// Whether the two markets have identical curves, noise laws and caps in period `t`.
pub fn identical_markets(spec: &ProblemSpec, t: usize) -> std::result::Result<(), String> {
    let p = spec.period(t);
    let (s, l) = (&p.on_site, &p.long_distance);
    let same_form = match (&s.form, &l.form) {
        (DemandForm::Linear { b: b1, c: c1 }, DemandForm::Linear { b: b2, c: c2 }) => {
            b1 == b2 && c1 == c2
        }
        (DemandForm::Tabulated { points: a }, DemandForm::Tabulated { points: b }) => a == b,
        _ => false,
    };
    if !same_form {
        return Err("revenue curves differ".into());
    }
    if s.d_upper != l.d_upper || s.d_lower != l.d_lower {
        return Err("demand bounds differ".into());
    }
    if p.noise.on_site != p.noise.long_distance {
        return Err("noise laws differ".into());
    }
    Ok(())
}

/// Distance from the kink of `H` treated as on it; well above the optimizer's line tolerance.
const KINK_TOL: f64 = 1e-5;

pub fn preference_crossing(sol: &Solution, t: usize, band: f64) -> Result<CrossingReport> {
    identical_markets(&sol.spec, t).map_err(Error::Hypothesis)?;
    if sol
        .spec
        .forced_closed(t, crate::model::Market::LongDistance)
    {
        return Err(Error::Hypothesis(format!(
            "long-distance market is closed in period {t}"
        )));
    }
    let noise = StageNoise::for_period(sol.spec.period(t), sol.nodes)?;
    let stage = sol.stage(t, &noise);
    let grid = &sol.grid;
    let (ds, dl) = (&sol.d_s[t - 1], &sol.d_l[t - 1]);
    let g: Vec<(f64, f64)> = (0..grid.len())
        .map(|k| stage.weighted_holding_slope_range(grid.point(k), ds[k], KINK_TOL))
        .collect();
    let mut violations = Vec::new();
    for k in 0..grid.len() {
        let (lo, hi) = g[k];
        let bad = (hi < -band && ds[k] > dl[k] + TIE_TOL) || (lo > band && ds[k] < dl[k] - TIE_TOL);
        if bad {
            violations.push(grid.point(k));
        }
    }
    let mid = |k: usize| grid.point(k) - 0.5 * grid.step;
    let zero_band = (0..grid.len()).find(|&k| g[k].1 >= -band).and_then(|a| {
        (a..grid.len())
            .find(|&k| g[k].0 > band)
            .map(|b| (grid.point(a), grid.point(b)))
    });
    let last_below = (0..grid.len()).rev().find(|&k| ds[k] < dl[k] - TIE_TOL);
    let policy_crossing = match last_below {
        Some(k) if k + 1 < grid.len() => Some(mid(k + 1)),
        _ => None,
    };
    Ok(CrossingReport {
        t,
        g,
        violations,
        zero_band,
        policy_crossing,
        band,
    })
}
