//! Forward Monte Carlo replay of a season under a computed policy.
//!
//! Each period: replenishment arrives, intensities are read off the policy,
//! on-site demand is served and `H` is charged on `I + q_t - D_s`, then the
//! long-distance orders are taken for shipment next period, giving
//! `I_{t+1} = I_t + q_t - D_s - D_l`. The terminal emergency cost settles any
//! remaining backlog. Noise is drawn from the continuous laws, not from the
//! quadrature nodes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dp::Solution;
use crate::error::{Error, Result};
use crate::export::{fmt_inventory, fmt_num, header};
use crate::model::{Correlation, Dist, NoiseModel, NoiseRole, ProblemSpec};
use crate::parallel::map_indices;
use crate::quadrature::solve_location;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Book expected revenue `R(d)`.
    #[default]
    Expectation,
    /// Book realized demand times price.
    Realized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonState {
    /// Period about to be played; `T + 1` once the season is over.
    pub t: usize,
    pub inventory: f64,
    /// Long-distance orders taken in the last period, shipped from the current stock.
    pub pending_l: f64,
    /// Discounted cumulative profit.
    pub cash: f64,
}

impl SeasonState {
    pub fn start(inventory: f64) -> Self {
        SeasonState {
            t: 1,
            inventory,
            pending_l: 0.0,
            cash: 0.0,
        }
    }
}

/// What happened in one period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub inventory: f64,
    pub d_s: f64,
    pub d_l: f64,
    pub demand_s: f64,
    pub demand_l: f64,
    /// Units owed before this period's replenishment arrives: `(I_t - D_s - D_l)^-`.
    pub backlog_pre_receipt: f64,
    /// Undiscounted revenue booked this period.
    pub revenue: f64,
    /// Undiscounted `H(I + q_t - D_s)`.
    pub holding: f64,
    /// Cash after the period (and after terminal settlement in the last one).
    pub cash: f64,
}

/// Plays period `state.t` with intensities `(d_s, d_l)` and realized demands.
pub fn step(
    spec: &ProblemSpec,
    state: &SeasonState,
    (d_s, d_l): (f64, f64),
    (demand_s, demand_l): (f64, f64),
    mode: Accounting,
) -> (SeasonState, StepRecord) {
    let t = state.t;
    let period = spec.period(t);
    let costs = &spec.costs;
    let discount = costs.discount.powi(t as i32 - 1);
    let revenue = match mode {
        Accounting::Expectation => {
            period.on_site.revenue_unchecked(d_s) + period.long_distance.revenue_unchecked(d_l)
        }
        Accounting::Realized => {
            demand_s * period.on_site.price_unchecked(d_s)
                + demand_l * period.long_distance.price_unchecked(d_l)
        }
    };
    let on_site_end = state.inventory + period.replenishment - demand_s;
    let holding = costs.holding_cost(on_site_end);
    let next_inventory = on_site_end - demand_l;
    let mut cash = state.cash + discount * (revenue - holding);
    if t == spec.horizon() {
        cash += discount * costs.discount * costs.emergency * next_inventory.min(0.0);
    }
    let record = StepRecord {
        t,
        inventory: state.inventory,
        d_s,
        d_l,
        demand_s,
        demand_l,
        backlog_pre_receipt: (-(state.inventory - demand_s - demand_l)).max(0.0),
        revenue,
        holding,
        cash,
    };
    let next = SeasonState {
        t: t + 1,
        inventory: next_inventory,
        pending_l: demand_l,
        cash,
    };
    (next, record)
}

/// Inverse-CDF sampler for one noise component.
#[derive(Clone, Debug)]
enum Sampler {
    Fixed(f64),
    Truncated {
        normal: Normal,
        lo_cdf: f64,
        hi_cdf: f64,
        lo: f64,
        hi: f64,
    },
}

impl Sampler {
    fn new(dist: &Dist, role: NoiseRole) -> Result<Self> {
        match *dist {
            Dist::PointMass => Ok(Sampler::Fixed(role.target_mean())),
            Dist::TruncatedNormal { sigma, lo, hi } => {
                let mu = solve_location(role.target_mean(), sigma, lo, hi)?;
                let normal = Normal::new(mu, sigma).map_err(|e| Error::Noise(e.to_string()))?;
                Ok(Sampler::Truncated {
                    lo_cdf: normal.cdf(lo),
                    hi_cdf: normal.cdf(hi),
                    normal,
                    lo,
                    hi,
                })
            }
        }
    }

    fn sample(&self, u: f64) -> f64 {
        match self {
            Sampler::Fixed(v) => *v,
            Sampler::Truncated {
                normal,
                lo_cdf,
                hi_cdf,
                lo,
                hi,
            } => normal
                .inverse_cdf(lo_cdf + u * (hi_cdf - lo_cdf))
                .clamp(*lo, *hi),
        }
    }
}

#[derive(Clone, Debug)]
struct PeriodSampler {
    eps_s: Sampler,
    eps_l: Sampler,
    omega_s: Sampler,
    omega_l: Sampler,
    correlation: Correlation,
}

impl PeriodSampler {
    fn new(noise: &NoiseModel) -> Result<Self> {
        Ok(PeriodSampler {
            eps_s: Sampler::new(&noise.on_site.multiplicative, NoiseRole::Multiplicative)?,
            eps_l: Sampler::new(
                &noise.long_distance.multiplicative,
                NoiseRole::Multiplicative,
            )?,
            omega_s: Sampler::new(&noise.on_site.additive, NoiseRole::Additive)?,
            omega_l: Sampler::new(&noise.long_distance.additive, NoiseRole::Additive)?,
            correlation: noise.correlation,
        })
    }

    /// Realized demands, truncated at zero. Always consumes four uniforms.
    fn demands(&self, rng: &mut ChaCha8Rng, d_s: f64, d_l: f64) -> (f64, f64) {
        let u: [f64; 4] = rng.gen();
        let eps_l = self.eps_l.sample(u[1]);
        let eps_s = match self.correlation {
            Correlation::Independent => self.eps_s.sample(u[0]),
            Correlation::PerfectLinear { a } => 1.0 + a * (eps_l - 1.0),
        };
        let demand_s = (eps_s * d_s + self.omega_s.sample(u[2])).max(0.0);
        let demand_l = (eps_l * d_l + self.omega_l.sample(u[3])).max(0.0);
        (demand_s, demand_l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n_paths: usize,
    pub seed: u64,
    pub accounting: Accounting,
    pub parallel: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n_paths: 10_000,
            seed: 0,
            accounting: Accounting::Expectation,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub initial_inventory: f64,
    pub mean_profit: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Fraction of paths ending the season with a backlog.
    pub terminal_backlog_rate: f64,
    /// Visits to inventory levels outside the policy grid.
    pub grid_escapes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub profit: f64,
    pub final_inventory: f64,
    pub escapes: usize,
    pub steps: Vec<StepRecord>,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Plays one season from `initial_inventory` with its own random stream.
fn simulate_path(
    sol: &Solution,
    samplers: &[PeriodSampler],
    initial_inventory: f64,
    seed: u64,
    path: usize,
    accounting: Accounting,
) -> PathResult {
    let spec = &sol.spec;
    let mut rng = path_rng(seed, path);
    let mut state = SeasonState::start(initial_inventory);
    let mut steps = Vec::with_capacity(spec.horizon());
    let mut escapes = 0;
    for t in 1..=spec.horizon() {
        if !sol.grid.contains(state.inventory) {
            escapes += 1;
        }
        let (d_s, d_l) = sol.policy_at(t, state.inventory);
        let demand = samplers[t - 1].demands(&mut rng, d_s, d_l);
        let (next, record) = step(spec, &state, (d_s, d_l), demand, accounting);
        steps.push(record);
        state = next;
    }
    PathResult {
        profit: state.cash,
        final_inventory: state.inventory,
        escapes,
        steps,
    }
}

fn samplers(spec: &ProblemSpec) -> Result<Vec<PeriodSampler>> {
    spec.periods
        .iter()
        .map(|p| PeriodSampler::new(&p.noise))
        .collect()
}

fn summarize(initial_inventory: f64, paths: &[PathResult]) -> SimStats {
    let n = paths.len();
    // sequential sums keep results independent of thread count
    let mean = paths.iter().map(|p| p.profit).sum::<f64>() / n as f64;
    let var = if n > 1 {
        paths.iter().map(|p| (p.profit - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    SimStats {
        initial_inventory,
        mean_profit: mean,
        std_error: (var / n as f64).sqrt(),
        n_paths: n,
        terminal_backlog_rate: paths.iter().filter(|p| p.final_inventory < 0.0).count() as f64
            / n as f64,
        grid_escapes: paths.iter().map(|p| p.escapes).sum(),
    }
}

/// Runs the simulation and keeps every path's step records.
pub fn simulate_paths(
    sol: &Solution,
    initial_inventory: f64,
    opts: &SimOptions,
) -> Result<(SimStats, Vec<PathResult>)> {
    if opts.n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    let samplers = samplers(&sol.spec)?;
    let paths = map_indices(opts.n_paths, opts.parallel, |i| {
        simulate_path(
            sol,
            &samplers,
            initial_inventory,
            opts.seed,
            i,
            opts.accounting,
        )
    });
    let stats = summarize(initial_inventory, &paths);
    if stats.grid_escapes > 0 {
        log::warn!(
            "{} visits outside the policy grid [{}, {}] from I0={initial_inventory}; policy held constant there",
            stats.grid_escapes,
            sol.grid.min(),
            sol.grid.max()
        );
    }
    Ok((stats, paths))
}

pub fn simulate(sol: &Solution, initial_inventory: f64, opts: &SimOptions) -> Result<SimStats> {
    simulate_paths(sol, initial_inventory, opts).map(|(stats, _)| stats)
}

/// `path,t,I,d_s,d_l,D_s,D_l,cash` for every recorded step.
pub fn trace_csv(sol: &Solution, opts: &SimOptions, paths: &[PathResult]) -> String {
    let mut out = header(
        sol,
        &[
            ("seed", opts.seed.to_string()),
            (
                "accounting",
                format!("{:?}", opts.accounting).to_lowercase(),
            ),
        ],
    );
    out.push_str("path,t,I,d_s,d_l,D_s,D_l,cash\n");
    for (i, p) in paths.iter().enumerate() {
        for s in &p.steps {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{}",
                s.t,
                fmt_inventory(s.inventory),
                fmt_num(s.d_s),
                fmt_num(s.d_l),
                fmt_num(s.demand_s),
                fmt_num(s.demand_l),
                fmt_num(s.cash)
            );
        }
    }
    out
}
