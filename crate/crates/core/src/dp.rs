//! Backward induction on the inventory grid.
//!
//! `J_t(I, d_s, d_l) = R_s(d_s) + R_l(d_l) - E H(I + q_t - eps_s d_s - omega_s)
//!                     + alpha E V_{t+1}(I + q_t - D_s - D_l)`
//! is maximized at every grid point, starting from the terminal condition
//! `V_{T+1}(I) = c_e min(0, I)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{InventoryGrid, PiecewiseLinear};
use crate::model::{validate, CostSpec, Market, PeriodSpec, ProblemSpec};
use crate::optimize::{maximize_box, SearchOptions};
use crate::parallel::map_indices;
use crate::quadrature::{StageNoise, DEFAULT_NODES};

/// A market counts as open when its intensity exceeds this many units.
pub const TIE_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub nodes: usize,
    pub search: SearchOptions,
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nodes: DEFAULT_NODES,
            search: SearchOptions::default(),
            parallel: true,
        }
    }
}

impl SolverOptions {
    pub fn with_nodes(nodes: usize) -> Self {
        SolverOptions {
            nodes,
            ..Self::default()
        }
    }
}

pub fn terminal_value(inventory: f64, costs: &CostSpec) -> f64 {
    costs.emergency * inventory.min(0.0)
}

/// Value of the period after the current one.
#[derive(Clone, Copy, Debug)]
pub enum Continuation<'a> {
    Terminal(f64),
    Table(&'a PiecewiseLinear),
}

impl Continuation<'_> {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Continuation::Terminal(c_e) => c_e * x.min(0.0),
            Continuation::Table(v) => v.eval(x),
        }
    }
}

/// Everything needed to evaluate and maximize one period's objective.
#[derive(Clone, Copy)]
pub struct Stage<'a> {
    pub period: &'a PeriodSpec,
    pub costs: &'a CostSpec,
    pub noise: &'a StageNoise,
    pub next: Continuation<'a>,
    /// Forces `d_l = 0`.
    pub close_long: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePolicy {
    pub d_s: f64,
    pub d_l: f64,
    pub value: f64,
}

impl Stage<'_> {
    /// `J_t` without bounds checks.
    #[inline]
    pub fn objective_unchecked(&self, inventory: f64, d_s: f64, d_l: f64) -> f64 {
        let revenue = self.period.on_site.revenue_unchecked(d_s)
            + self.period.long_distance.revenue_unchecked(d_l);
        revenue + self.inventory_terms(inventory, d_s, d_l)
    }

    /// `J_t` minus revenue: `-E H(..) + alpha E V_{t+1}(..)`.
    #[inline]
    pub fn inventory_terms(&self, inventory: f64, d_s: f64, d_l: f64) -> f64 {
        let x = inventory + self.period.replenishment;
        let costs = self.costs;
        let mut holding = 0.0;
        for h in &self.noise.holding {
            holding += h[2] * costs.holding_cost(x - h[0] * d_s - h[1]);
        }
        let next = &self.next;
        let mut cont = 0.0;
        match (d_s == 0.0, d_l == 0.0) {
            (false, false) => {
                for c in &self.noise.cont {
                    cont += c[3] * next.eval(x - c[0] * d_s - c[1] * d_l - c[2]);
                }
            }
            (false, true) => {
                for c in &self.noise.cont_s {
                    cont += c[2] * next.eval(x - c[0] * d_s - c[1]);
                }
            }
            (true, false) => {
                for c in &self.noise.cont_l {
                    cont += c[2] * next.eval(x - c[0] * d_l - c[1]);
                }
            }
            (true, true) => {
                for c in &self.noise.cont_none {
                    cont += c[1] * next.eval(x - c[0]);
                }
            }
        }
        costs.discount * cont - holding
    }

    /// `E H'(I + q_t - eps_s d_s - omega_s)`.
    pub fn holding_slope(&self, inventory: f64, d_s: f64) -> f64 {
        let x = inventory + self.period.replenishment;
        self.noise
            .holding
            .iter()
            .map(|h| h[2] * self.costs.holding_cost_slope(x - h[0] * d_s - h[1]))
            .sum()
    }

    /// `E[eps_s H'(I + q_t - eps_s d_s - omega_s)]`.
    pub fn weighted_holding_slope(&self, inventory: f64, d_s: f64) -> f64 {
        let x = inventory + self.period.replenishment;
        self.noise
            .holding
            .iter()
            .map(|h| h[2] * h[0] * self.costs.holding_cost_slope(x - h[0] * d_s - h[1]))
            .sum()
    }

    /// Range of `E[eps_s H'(..)]` over the subgradients of `H`: outcomes that
    /// land within `kink_tol` of zero contribute both one-sided slopes.
    pub fn weighted_holding_slope_range(
        &self,
        inventory: f64,
        d_s: f64,
        kink_tol: f64,
    ) -> (f64, f64) {
        let x = inventory + self.period.replenishment;
        let c = self.costs;
        let (mut lo, mut hi) = (0.0, 0.0);
        for h in &self.noise.holding {
            let arg = x - h[0] * d_s - h[1];
            let w = h[2] * h[0];
            if arg.abs() <= kink_tol {
                lo -= w * c.shortage;
                hi += w * c.holding;
            } else {
                let slope = w * c.holding_cost_slope(arg);
                lo += slope;
                hi += slope;
            }
        }
        (lo, hi)
    }

    /// `J_t` with demand-domain checks.
    pub fn objective(&self, inventory: f64, d_s: f64, d_l: f64) -> Result<f64> {
        self.period.on_site.revenue(d_s)?;
        if self.close_long {
            if d_l != 0.0 {
                return Err(Error::Domain {
                    value: d_l,
                    lower: 0.0,
                    upper: 0.0,
                });
            }
        } else {
            self.period.long_distance.revenue(d_l)?;
        }
        Ok(self.objective_unchecked(inventory, d_s, d_l))
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let s = &self.period.on_site;
        let l = &self.period.long_distance;
        if self.close_long {
            ([s.d_lower, 0.0], [s.d_upper, 0.0])
        } else {
            ([s.d_lower, l.d_lower], [s.d_upper, l.d_upper])
        }
    }

    pub fn optimize(&self, inventory: f64, opts: &SearchOptions) -> Result<StagePolicy> {
        let (lo, hi) = self.bounds();
        let m = maximize_box(
            |a, b| self.objective_unchecked(inventory, a, b),
            lo,
            hi,
            opts,
        )?;
        Ok(StagePolicy {
            d_s: m.x[0],
            d_l: m.x[1],
            value: m.value,
        })
    }

    /// Maximizes at every grid point.
    pub fn optimize_grid(
        &self,
        t: usize,
        grid: &InventoryGrid,
        opts: &SolverOptions,
    ) -> Result<Vec<StagePolicy>> {
        map_indices(grid.len(), opts.parallel, |k| {
            let inventory = grid.point(k);
            self.optimize(inventory, &opts.search)
                .map_err(|e| Error::AtState {
                    t,
                    inventory,
                    source: Box::new(e),
                })
        })
        .into_iter()
        .collect()
    }
}

/// Value and policy tables for every period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub spec: ProblemSpec,
    pub grid: InventoryGrid,
    pub nodes: usize,
    /// `values[t - 1]` holds `V_t`.
    pub values: Vec<PiecewiseLinear>,
    /// `d_s[t - 1][k]` is `d*_s,t` at grid point `k`.
    pub d_s: Vec<Vec<f64>>,
    pub d_l: Vec<Vec<f64>>,
}

impl Solution {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// `V_t(I)`; `t = T + 1` gives the terminal value.
    pub fn value_at(&self, t: usize, inventory: f64) -> f64 {
        if t == self.horizon() + 1 {
            terminal_value(inventory, &self.spec.costs)
        } else {
            self.values[t - 1].eval(inventory)
        }
    }

    pub fn value_table(&self, t: usize) -> &PiecewiseLinear {
        &self.values[t - 1]
    }

    pub fn continuation(&self, t: usize) -> Continuation<'_> {
        if t == self.horizon() {
            Continuation::Terminal(self.spec.costs.emergency)
        } else {
            Continuation::Table(&self.values[t])
        }
    }

    pub fn policy(&self, t: usize, m: Market) -> &[f64] {
        match m {
            Market::OnSite => &self.d_s[t - 1],
            Market::LongDistance => &self.d_l[t - 1],
        }
    }

    /// Policy interpolated linearly between grid points, held constant outside the grid.
    pub fn policy_at(&self, t: usize, inventory: f64) -> (f64, f64) {
        let g = &self.grid;
        let u = (inventory / g.step - g.k_min as f64).clamp(0.0, (g.len() - 1) as f64);
        let i = (u.floor() as usize).min(g.len() - 2);
        let f = u - i as f64;
        let lerp = |v: &[f64]| v[i] + f * (v[i + 1] - v[i]);
        (lerp(&self.d_s[t - 1]), lerp(&self.d_l[t - 1]))
    }

    /// Exact grid lookup; `None` when `inventory` is not a grid point.
    pub fn policy_on_grid(&self, t: usize, inventory: f64) -> Option<(f64, f64)> {
        let k = self.grid.index_of(inventory)?;
        Some((self.d_s[t - 1][k], self.d_l[t - 1][k]))
    }

    pub fn stage<'a>(&'a self, t: usize, noise: &'a StageNoise) -> Stage<'a> {
        Stage {
            period: self.spec.period(t),
            costs: &self.spec.costs,
            noise,
            next: self.continuation(t),
            close_long: self.spec.forced_closed(t, Market::LongDistance),
        }
    }
}

/// Backward induction over the whole horizon.
pub fn solve(spec: &ProblemSpec, grid: &InventoryGrid, opts: &SolverOptions) -> Result<Solution> {
    validate(spec).into_result()?;
    let horizon = spec.horizon();
    let mut values: Vec<Option<PiecewiseLinear>> = vec![None; horizon];
    let mut d_s = vec![Vec::new(); horizon];
    let mut d_l = vec![Vec::new(); horizon];
    for t in (1..=horizon).rev() {
        let noise = StageNoise::for_period(spec.period(t), opts.nodes)?;
        let next = if t == horizon {
            Continuation::Terminal(spec.costs.emergency)
        } else {
            Continuation::Table(values[t].as_ref().expect("later period solved first"))
        };
        let stage = Stage {
            period: spec.period(t),
            costs: &spec.costs,
            noise: &noise,
            next,
            close_long: spec.forced_closed(t, Market::LongDistance),
        };
        let policies = stage.optimize_grid(t, grid, opts)?;
        log::debug!("period {t}: {} grid points solved", policies.len());
        d_s[t - 1] = policies.iter().map(|p| p.d_s).collect();
        d_l[t - 1] = policies.iter().map(|p| p.d_l).collect();
        values[t - 1] = Some(PiecewiseLinear::new(
            *grid,
            policies.iter().map(|p| p.value).collect(),
        ));
    }
    Ok(Solution {
        spec: spec.clone(),
        grid: *grid,
        nodes: opts.nodes,
        values: values
            .into_iter()
            .map(|v| v.expect("every period solved"))
            .collect(),
        d_s,
        d_l,
    })
}

/// Grid covering every state reachable from starting inventories up to
/// `i0_max` when each market sells at most its demand cap per period.
pub fn default_grid(spec: &ProblemSpec, i0_max: f64, step: f64) -> Result<InventoryGrid> {
    let q = spec.total_replenishment();
    let cap: f64 = spec
        .periods
        .iter()
        .map(|p| p.on_site.d_upper + p.long_distance.d_upper)
        .fold(0.0, f64::max);
    InventoryGrid::new(-(q + spec.horizon() as f64 * cap), i0_max + q, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::example1;
    use crate::model::{Dist, NoiseModel, NoiseRole};
    use crate::quadrature::discretize;

    fn deterministic(mut spec: ProblemSpec) -> ProblemSpec {
        for p in spec.periods.iter_mut() {
            p.noise = NoiseModel::default();
        }
        spec
    }

    #[test]
    fn terminal_condition() {
        let c = example1().costs;
        assert_eq!(terminal_value(-2.0, &c), -20.0);
        assert_eq!(terminal_value(5.0, &c), 0.0);
        assert_eq!(terminal_value(0.0, &c), 0.0);
    }

    #[test]
    fn zero_demand_zero_stock_objective() {
        let spec = deterministic(example1());
        let noise = StageNoise::for_period(spec.period(2), 4).unwrap();
        let next = PiecewiseLinear::new(
            InventoryGrid::new(-1.0, 1.0, 0.5).unwrap(),
            vec![-3.0, -1.0, 0.25, 0.5, 0.75],
        );
        let stage = Stage {
            period: spec.period(2),
            costs: &spec.costs,
            noise: &noise,
            next: Continuation::Table(&next),
            close_long: false,
        };
        // I + q = 0 with q_2 = 1
        let j = stage.objective(-1.0, 0.0, 0.0).unwrap();
        assert!((j - 0.8 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn deterministic_last_period_hand_value() {
        let spec = deterministic(example1());
        let noise = StageNoise::for_period(spec.period(2), 4).unwrap();
        let stage = Stage {
            period: spec.period(2),
            costs: &spec.costs,
            noise: &noise,
            next: Continuation::Terminal(spec.costs.emergency),
            close_long: true,
        };
        // R_s(1) = 9.5, ending stock 0, terminal 0
        assert!((stage.objective(0.0, 1.0, 0.0).unwrap() - 9.5).abs() < 1e-12);
        assert!(stage.objective(0.0, 1.0, 0.5).is_err());
        assert!(stage.objective(0.0, 9.5, 0.0).is_err());
    }

    #[test]
    fn objective_matches_naive_double_loop() {
        let spec = example1();
        let noise = StageNoise::for_period(spec.period(1), 6).unwrap();
        let next = PiecewiseLinear::new(
            InventoryGrid::new(-20.0, 20.0, 0.5).unwrap(),
            (0..81).map(|k| -0.02 * (k as f64 - 45.0).powi(2)).collect(),
        );
        let stage = Stage {
            period: spec.period(1),
            costs: &spec.costs,
            noise: &noise,
            next: Continuation::Table(&next),
            close_long: false,
        };
        let p = spec.period(1);
        let es = discretize(
            &p.noise.on_site.multiplicative,
            NoiseRole::Multiplicative,
            6,
        )
        .unwrap();
        let el = discretize(
            &p.noise.long_distance.multiplicative,
            NoiseRole::Multiplicative,
            6,
        )
        .unwrap();
        let mut state = 12345u64;
        let mut draw = |hi: f64| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            hi * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        for _ in 0..20 {
            let (i, ds, dl) = (draw(10.0) - 5.0, draw(9.0), draw(9.0));
            let x = i + p.replenishment;
            let mut naive = ds * (10.0 - 0.5 * ds) + dl * (9.0 - 0.5 * dl);
            for (s, ws) in es.iter() {
                let y = x - s * ds;
                naive -= ws * if y > 0.0 { 2.0 * y } else { -5.0 * y };
                for (l, wl) in el.iter() {
                    naive += 0.8 * ws * wl * next.eval(x - s * ds - l * dl);
                }
            }
            let j = stage.objective(i, ds, dl).unwrap();
            assert!((j - naive).abs() < 1e-10, "{j} vs {naive}");
        }
    }

    #[test]
    fn zero_costs_make_inventory_irrelevant() {
        let mut spec = deterministic(example1());
        spec.costs = CostSpec {
            holding: 0.0,
            shortage: 0.0,
            emergency: 0.0,
            discount: 1.0,
        };
        spec.last_period_rule = false;
        let grid = InventoryGrid::new(-5.0, 5.0, 0.5).unwrap();
        // costs of zero violate the standing assumption only marginally on c_e
        let stage_values: Vec<f64> = {
            let sol = solve_unvalidated(&spec, &grid);
            sol.values[0].values.clone()
        };
        // two periods, each earns R_s(9) + R_l(9) at the demand cap
        let per_period = 9.0 * (10.0 - 4.5) + 9.0 * (9.0 - 4.5);
        for v in stage_values {
            assert!((v - 2.0 * per_period).abs() < 1e-6, "{v}");
        }
    }

    fn solve_unvalidated(spec: &ProblemSpec, grid: &InventoryGrid) -> Solution {
        let opts = SolverOptions::with_nodes(4);
        let horizon = spec.horizon();
        let mut values: Vec<PiecewiseLinear> = Vec::new();
        let mut d_s = Vec::new();
        let mut d_l = Vec::new();
        for t in (1..=horizon).rev() {
            let noise = StageNoise::for_period(spec.period(t), opts.nodes).unwrap();
            let next = if t == horizon {
                Continuation::Terminal(spec.costs.emergency)
            } else {
                Continuation::Table(values.last().unwrap())
            };
            let stage = Stage {
                period: spec.period(t),
                costs: &spec.costs,
                noise: &noise,
                next,
                close_long: spec.forced_closed(t, Market::LongDistance),
            };
            let p = stage.optimize_grid(t, grid, &opts).unwrap();
            d_s.insert(0, p.iter().map(|x| x.d_s).collect());
            d_l.insert(0, p.iter().map(|x| x.d_l).collect());
            values.push(PiecewiseLinear::new(
                *grid,
                p.iter().map(|x| x.value).collect(),
            ));
        }
        values.reverse();
        Solution {
            spec: spec.clone(),
            grid: *grid,
            nodes: opts.nodes,
            values,
            d_s,
            d_l,
        }
    }

    #[test]
    fn one_period_deterministic_matches_stationarity() {
        // T = 1, q = 0: maximize R_s(d) - H(I - d) + c_e min(0, I - d)
        let mut spec = deterministic(example1());
        spec.periods.truncate(1);
        spec.periods[0].replenishment = 0.0;
        spec.last_period_rule = true;
        let grid = InventoryGrid::new(-2.0, 8.0, 0.5).unwrap();
        let sol = solve(&spec, &grid, &SolverOptions::with_nodes(4)).unwrap();
        for k in 0..grid.len() {
            let i = grid.point(k);
            // gain from d is R'(d) + c_h while stock remains, R'(d) - c_p - c_e below zero
            let expected = i.clamp(0.0, 9.0);
            assert!(
                (sol.d_s[0][k] - expected).abs() < 1e-4,
                "I={i}: {}",
                sol.d_s[0][k]
            );
            assert_eq!(sol.d_l[0][k], 0.0);
        }
    }

    #[test]
    fn example_values_are_concave_and_bounded() {
        let spec = example1();
        let grid = InventoryGrid::new(-6.0, 6.0, 0.1).unwrap();
        let sol = solve(&spec, &grid, &SolverOptions::with_nodes(8)).unwrap();
        for t in 1..=2 {
            assert!(sol.value_table(t).is_concave(1e-6));
            assert!(sol.d_s[t - 1].iter().all(|&d| (0.0..=9.0).contains(&d)));
        }
        assert!(sol.d_l[1].iter().all(|&d| d == 0.0));
        let k = grid.index_of(1.0).unwrap();
        assert_eq!(sol.value_at(1, 1.0), sol.values[0].values[k]);
        assert_eq!(sol.value_at(3, -2.0), -20.0);
    }

    #[test]
    fn noise_free_market_has_unit_factor() {
        let mut spec = example1();
        spec.period_mut(1).noise.long_distance.multiplicative = Dist::PointMass;
        let noise = StageNoise::for_period(spec.period(1), 8).unwrap();
        assert!(noise.eps.pairs.iter().all(|p| p.1 == 1.0));
    }
}
