//! Problem data: revenue curves, demand noise, costs and the full instance.
//!
//! Demand in market `i` during period `t` is `D = eps * d + omega`, where the
//! firm controls the mean intensity `d` through price. Everything here is
//! immutable once built and is shared freely across worker threads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a demand lies inside its bounds.
const DOMAIN_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Market {
    OnSite,
    LongDistance,
}

impl Market {
    pub const BOTH: [Market; 2] = [Market::OnSite, Market::LongDistance];

    pub fn short(self) -> &'static str {
        match self {
            Market::OnSite => "s",
            Market::LongDistance => "l",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Market::OnSite => f.write_str("on-site"),
            Market::LongDistance => f.write_str("long-distance"),
        }
    }
}

/// Price-to-mean-demand relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandForm {
    /// `d(p) = b - c * p`.
    Linear { b: f64, c: f64 },
    /// Inverse demand `p(d)` given at increasing `d`, linear in between.
    Tabulated { points: Vec<[f64; 2]> },
}

/// Expected revenue `R(d) = d * p(d)` of one market in one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueCurve {
    pub market: Market,
    pub form: DemandForm,
    pub d_lower: f64,
    pub d_upper: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

impl RevenueCurve {
    /// Linear demand `d = b - c p` restricted to `[d_lower, d_upper]`; the
    /// price bounds follow from the demand bounds.
    pub fn linear(market: Market, b: f64, c: f64, d_lower: f64, d_upper: f64) -> Self {
        RevenueCurve {
            market,
            form: DemandForm::Linear { b, c },
            d_lower,
            d_upper,
            p_lower: (b - d_upper) / c,
            p_upper: (b - d_lower) / c,
        }
    }

    /// Equal-price form `d = beta * (1 - p / p_max)` for `p` in `[p_min, p_max]`.
    pub fn beta_form(market: Market, beta: f64, p_max: f64, p_min: f64) -> Self {
        let mut curve = Self::linear(
            market,
            beta,
            beta / p_max,
            0.0,
            beta * (1.0 - p_min / p_max),
        );
        curve.p_lower = p_min;
        curve.p_upper = p_max;
        curve
    }

    pub fn tabulated(market: Market, points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config(
                "tabulated curve needs at least two points".into(),
            ));
        }
        let first = points[0];
        let last = points[points.len() - 1];
        Ok(RevenueCurve {
            market,
            d_lower: first[0],
            d_upper: last[0],
            p_lower: last[1],
            p_upper: first[1],
            form: DemandForm::Tabulated { points },
        })
    }

    fn check_domain(&self, d: f64) -> Result<()> {
        if d.is_nan() || d < self.d_lower - DOMAIN_EPS || d > self.d_upper + DOMAIN_EPS {
            return Err(Error::Domain {
                value: d,
                lower: self.d_lower,
                upper: self.d_upper,
            });
        }
        Ok(())
    }

    /// Inverse demand, no bounds check.
    pub(crate) fn price_unchecked(&self, d: f64) -> f64 {
        match &self.form {
            DemandForm::Linear { b, c } => (b - d) / c,
            DemandForm::Tabulated { points } => tabulated_price(points, d),
        }
    }

    pub(crate) fn revenue_unchecked(&self, d: f64) -> f64 {
        d * self.price_unchecked(d)
    }

    pub fn price(&self, d: f64) -> Result<f64> {
        self.check_domain(d)?;
        Ok(self.price_unchecked(d))
    }

    pub fn revenue(&self, d: f64) -> Result<f64> {
        self.check_domain(d)?;
        Ok(self.revenue_unchecked(d))
    }

    pub fn marginal_revenue(&self, d: f64) -> Result<f64> {
        self.check_domain(d)?;
        Ok(self.marginal_revenue_unchecked(d))
    }

    pub(crate) fn marginal_revenue_unchecked(&self, d: f64) -> f64 {
        match &self.form {
            DemandForm::Linear { b, c } => (b - 2.0 * d) / c,
            DemandForm::Tabulated { .. } => {
                let h = 1e-6 * (self.d_upper - self.d_lower).max(1e-9);
                let lo = (d - h).max(self.d_lower);
                let hi = (d + h).min(self.d_upper);
                (self.revenue_unchecked(hi) - self.revenue_unchecked(lo)) / (hi - lo)
            }
        }
    }

    /// `R'` at the lowest admissible demand; the market-opening marginal revenue.
    pub fn opening_marginal_revenue(&self) -> f64 {
        self.marginal_revenue_unchecked(self.d_lower)
    }

    /// Demand that maximizes revenue inside the bounds.
    pub fn revenue_maximizer(&self) -> f64 {
        match &self.form {
            DemandForm::Linear { b, .. } => (0.5 * b).clamp(self.d_lower, self.d_upper),
            DemandForm::Tabulated { .. } => {
                crate::optimize::golden_section_max(
                    |d| self.revenue_unchecked(d),
                    self.d_lower,
                    self.d_upper,
                    1e-10,
                )
                .0
            }
        }
    }

    /// Demand for a given price (inverse of `price`).
    pub fn demand_at_price(&self, p: f64) -> f64 {
        match &self.form {
            DemandForm::Linear { b, c } => b - c * p,
            DemandForm::Tabulated { points } => {
                // price decreases in d; walk segments
                for w in points.windows(2) {
                    let (d0, p0, d1, p1) = (w[0][0], w[0][1], w[1][0], w[1][1]);
                    if p <= p0 && p >= p1 {
                        if (p0 - p1).abs() < f64::EPSILON {
                            return d0;
                        }
                        return d0 + (p0 - p) / (p0 - p1) * (d1 - d0);
                    }
                }
                if p > points[0][1] {
                    points[0][0]
                } else {
                    points[points.len() - 1][0]
                }
            }
        }
    }

    /// Violations of this curve's own invariants.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.d_lower >= 0.0 && self.d_lower < self.d_upper) {
            out.push(format!(
                "demand bounds must satisfy 0 <= d_lower < d_upper, got [{}, {}]",
                self.d_lower, self.d_upper
            ));
            return out;
        }
        match &self.form {
            DemandForm::Linear { b, c } => {
                if !(*b > 0.0 && *c > 0.0) {
                    out.push(format!(
                        "linear demand needs b > 0 and c > 0, got b={b}, c={c}"
                    ));
                    return out;
                }
            }
            DemandForm::Tabulated { points } => {
                if points
                    .windows(2)
                    .any(|w| w[1][0] <= w[0][0] || w[1][1] >= w[0][1])
                {
                    out.push("tabulated points need increasing demand and decreasing price".into());
                    return out;
                }
            }
        }
        let scale = self.p_upper.abs().max(1.0);
        if (self.price_unchecked(self.d_upper) - self.p_lower).abs() > 1e-9 * scale
            || (self.price_unchecked(self.d_lower) - self.p_upper).abs() > 1e-9 * scale
        {
            out.push(format!(
                "price bounds [{}, {}] inconsistent with p(d_upper)={} and p(d_lower)={}",
                self.p_lower,
                self.p_upper,
                self.price_unchecked(self.d_upper),
                self.price_unchecked(self.d_lower)
            ));
        }
        if self.p_lower < 0.0 {
            out.push(format!("negative lower price {}", self.p_lower));
        }
        let probe = probe_grid(self.d_lower, self.d_upper, 101);
        let r: Vec<f64> = probe.iter().map(|&d| self.revenue_unchecked(d)).collect();
        if r.windows(2).any(|w| w[1] <= w[0]) {
            out.push("revenue is not strictly increasing on its demand range".into());
        }
        if r.windows(3).any(|w| w[0] + w[2] - 2.0 * w[1] >= 0.0) {
            out.push("revenue is not strictly concave on its demand range".into());
        }
        out
    }
}

fn tabulated_price(points: &[[f64; 2]], d: f64) -> f64 {
    let n = points.len();
    let seg = match points.iter().position(|p| p[0] >= d) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => n - 2,
    };
    let (a, b) = (points[seg], points[seg + 1]);
    a[1] + (d - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
}

pub(crate) fn probe_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Law of one noise component.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    /// Degenerate at the role's target mean (1 for multiplicative, 0 for additive).
    #[default]
    PointMass,
    /// Normal with standard deviation `sigma` truncated to `(lo, hi)`, located
    /// so the truncated law has the role's target mean.
    TruncatedNormal { sigma: f64, lo: f64, hi: f64 },
}

impl Dist {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Dist::PointMass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRole {
    Multiplicative,
    Additive,
}

impl NoiseRole {
    pub fn target_mean(self) -> f64 {
        match self {
            NoiseRole::Multiplicative => 1.0,
            NoiseRole::Additive => 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketNoise {
    #[serde(default)]
    pub multiplicative: Dist,
    #[serde(default)]
    pub additive: Dist,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correlation {
    #[default]
    Independent,
    /// `eps_s - 1 = a * (eps_l - 1)`.
    PerfectLinear { a: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub on_site: MarketNoise,
    pub long_distance: MarketNoise,
    #[serde(default)]
    pub correlation: Correlation,
}

impl NoiseModel {
    pub fn market(&self, m: Market) -> &MarketNoise {
        match m {
            Market::OnSite => &self.on_site,
            Market::LongDistance => &self.long_distance,
        }
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in Market::BOTH {
            let mn = self.market(m);
            for (role, dist) in [
                (NoiseRole::Multiplicative, &mn.multiplicative),
                (NoiseRole::Additive, &mn.additive),
            ] {
                if let Dist::TruncatedNormal { sigma, lo, hi } = *dist {
                    let tag = format!("{m} {role:?} noise");
                    if !(sigma > 0.0 && sigma.is_finite()) {
                        out.push(format!("{tag}: sigma must be positive, got {sigma}"));
                    }
                    if !(lo < hi) {
                        out.push(format!("{tag}: support ({lo}, {hi}) has no width"));
                        continue;
                    }
                    let target = role.target_mean();
                    if !(lo < target && target < hi) {
                        out.push(format!(
                            "{tag}: target mean {target} outside support ({lo}, {hi})"
                        ));
                    }
                    if role == NoiseRole::Multiplicative && lo < 0.0 {
                        out.push(format!("{tag}: support ({lo}, {hi}) not inside [0, inf)"));
                    }
                }
            }
        }
        if let Correlation::PerfectLinear { a } = self.correlation {
            let (l_lo, l_hi) = support_of(
                &self.long_distance.multiplicative,
                NoiseRole::Multiplicative,
            );
            let (s_lo, s_hi) = support_of(&self.on_site.multiplicative, NoiseRole::Multiplicative);
            let e1 = 1.0 + a * (l_lo - 1.0);
            let e2 = 1.0 + a * (l_hi - 1.0);
            let (lo, hi) = (e1.min(e2), e1.max(e2));
            if lo < s_lo - 1e-12 || hi > s_hi + 1e-12 {
                out.push(format!(
                    "perfect correlation a={a} maps long-distance support onto ({lo}, {hi}), outside on-site support ({s_lo}, {s_hi})"
                ));
            }
        }
        out
    }
}

pub(crate) fn support_of(dist: &Dist, role: NoiseRole) -> (f64, f64) {
    match *dist {
        Dist::PointMass => (role.target_mean(), role.target_mean()),
        Dist::TruncatedNormal { lo, hi, .. } => (lo, hi),
    }
}

/// Holding, shortage and terminal emergency costs plus the discount factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub holding: f64,
    pub shortage: f64,
    pub emergency: f64,
    pub discount: f64,
}

impl CostSpec {
    /// `H(x) = c_h x^+ + c_p (-x)^+`.
    #[inline]
    pub fn holding_cost(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.holding * x
        } else {
            -self.shortage * x
        }
    }

    /// Derivative of `H`; the kink at zero is resolved by shifting it 1e-12 units up.
    #[inline]
    pub fn holding_cost_slope(&self, x: f64) -> f64 {
        if x + 1e-12 > 0.0 {
            self.holding
        } else {
            -self.shortage
        }
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("holding", self.holding),
            ("shortage", self.shortage),
            ("emergency", self.emergency),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} cost must be nonnegative, got {v}"));
            }
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            out.push(format!(
                "discount factor must lie in (0, 1], got {}",
                self.discount
            ));
        }
        out
    }
}

/// Data for one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    /// Exogenous replenishment arriving at the start of the period.
    pub replenishment: f64,
    pub on_site: RevenueCurve,
    pub long_distance: RevenueCurve,
    pub noise: NoiseModel,
}

impl PeriodSpec {
    pub fn curve(&self, m: Market) -> &RevenueCurve {
        match m {
            Market::OnSite => &self.on_site,
            Market::LongDistance => &self.long_distance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub periods: Vec<PeriodSpec>,
    pub costs: CostSpec,
    /// Forces `d_l = 0` in the last period.
    pub last_period_rule: bool,
}

impl ProblemSpec {
    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    /// Period data, `t` is 1-based.
    pub fn period(&self, t: usize) -> &PeriodSpec {
        &self.periods[t - 1]
    }

    pub fn period_mut(&mut self, t: usize) -> &mut PeriodSpec {
        &mut self.periods[t - 1]
    }

    pub fn total_replenishment(&self) -> f64 {
        self.periods.iter().map(|p| p.replenishment).sum()
    }

    /// Whether market `m` is forced closed in period `t`.
    pub fn forced_closed(&self, t: usize, m: Market) -> bool {
        self.last_period_rule && m == Market::LongDistance && t == self.horizon()
    }

    /// No additive noise anywhere.
    pub fn is_multiplicative_only(&self) -> bool {
        self.periods.iter().all(|p| {
            p.noise.on_site.additive.is_degenerate()
                && p.noise.long_distance.additive.is_degenerate()
        })
    }

    /// `eps_m == 1` in every period.
    pub fn has_unit_eps(&self, m: Market) -> bool {
        self.periods
            .iter()
            .all(|p| p.noise.market(m).multiplicative.is_degenerate())
    }

    pub fn is_independent(&self) -> bool {
        self.periods
            .iter()
            .all(|p| matches!(p.noise.correlation, Correlation::Independent))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Violation,
    /// Holds with equality where strict inequality is required.
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    /// No violations; marginal findings are allowed.
    pub fn is_ok(&self) -> bool {
        self.issues
            .iter()
            .all(|i| i.severity != Severity::Violation)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Violation)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn push(&mut self, code: impl Into<String>, severity: Severity, message: impl Into<String>) {
        self.issues.push(Issue {
            code: code.into(),
            severity,
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            let tag = match i.severity {
                Severity::Violation => "violation",
                Severity::Marginal => "marginal",
            };
            writeln!(f, "  [{tag}] {}: {}", i.code, i.message)?;
        }
        Ok(())
    }
}

/// Checks every invariant of the instance, including both parts of the
/// standing assumption on marginal revenues and costs.
pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let costs = &spec.costs;
    for msg in costs.issues() {
        report.push("costs", Severity::Violation, msg);
    }
    if spec.periods.is_empty() {
        report.push(
            "horizon",
            Severity::Violation,
            "horizon must contain at least one period",
        );
        return report;
    }
    let c_max = costs.shortage.max(costs.holding);
    for (idx, p) in spec.periods.iter().enumerate() {
        let t = idx + 1;
        if !(p.replenishment.is_finite() && p.replenishment >= 0.0) {
            report.push(
                format!("replenishment.t{t}"),
                Severity::Violation,
                format!(
                    "replenishment must be finite and nonnegative, got {}",
                    p.replenishment
                ),
            );
        }
        for m in Market::BOTH {
            let curve = p.curve(m);
            if curve.market != m {
                report.push(
                    format!("curve.{}.t{t}", m.short()),
                    Severity::Violation,
                    format!("curve tagged {} used for {m}", curve.market),
                );
            }
            let issues = curve.issues();
            let broken = !issues.is_empty();
            for msg in issues {
                report.push(
                    format!("curve.{}.t{t}", m.short()),
                    Severity::Violation,
                    msg,
                );
            }
            if broken {
                continue;
            }
            let r0 = curve.opening_marginal_revenue();
            compare_strict(
                &mut report,
                "assumption1.1",
                r0,
                c_max,
                format!("period {t} {m}: R'(d_lower)={r0} must exceed max(c_p, c_h)={c_max}"),
            );
        }
        for msg in p.noise.issues() {
            report.push(format!("noise.t{t}"), Severity::Violation, msg);
        }
    }
    let last = spec.period(spec.horizon());
    if last.on_site.issues().is_empty() && last.long_distance.issues().is_empty() {
        let r_max = last
            .on_site
            .opening_marginal_revenue()
            .max(last.long_distance.opening_marginal_revenue());
        compare_strict(
            &mut report,
            "assumption1.2",
            costs.emergency,
            r_max - costs.shortage,
            format!(
                "c_e={} must exceed max(R'_s,T(0), R'_l,T(0)) - c_p = {}",
                costs.emergency,
                r_max - costs.shortage
            ),
        );
    }
    report
}

fn compare_strict(report: &mut ValidationReport, code: &str, lhs: f64, rhs: f64, msg: String) {
    let tol = 1e-9 * rhs.abs().max(1.0);
    if lhs > rhs + tol {
        return;
    }
    let severity = if (lhs - rhs).abs() <= tol {
        Severity::Marginal
    } else {
        Severity::Violation
    };
    report.push(code, severity, msg);
}
