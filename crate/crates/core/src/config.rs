//! TOML problem files.
//!
//! ```toml
//! name = "example1"
//! horizon = 2
//! replenishment = [2.0, 1.0]      # one entry per period, or a single value
//! last_period_rule = true
//! quadrature_nodes = 32
//!
//! [costs]
//! holding = 2.0
//! shortage = 5.0
//! emergency = 10.0
//! discount = 0.8
//!
//! [grid]                           # optional
//! min = -8.0
//! max = 8.0
//! step = 0.05
//!
//! [markets.on_site]
//! demand = { kind = "linear", b = 20.0, c = 2.0 }
//! d_lower = 0.0
//! d_upper = 9.0
//! multiplicative = { kind = "truncated_normal", sigma = 0.6, lo = 0.0, hi = 2.0 }
//! additive = { kind = "point_mass" }
//!
//! [markets.long_distance]
//! # same keys
//!
//! [correlation]                    # optional
//! kind = "perfect_linear"
//! a = -1.0
//! ```
//!
//! `demand` may also be `{ kind = "beta", beta, p_max, p_min }` for the shared
//! maximum-price form, or `{ kind = "tabulated", points = [[d, p], ...] }`.
//! Markets are stationary across periods.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dp::SolverOptions;
use crate::error::{Error, Result};
use crate::grid::InventoryGrid;
use crate::model::{
    Correlation, CostSpec, Dist, Market, MarketNoise, NoiseModel, PeriodSpec, ProblemSpec,
    RevenueCurve,
};
use crate::quadrature::DEFAULT_NODES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandConfig {
    Linear { b: f64, c: f64 },
    Beta { beta: f64, p_max: f64, p_min: f64 },
    Tabulated { points: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub demand: DemandConfig,
    pub d_lower: Option<f64>,
    pub d_upper: Option<f64>,
    #[serde(default)]
    pub multiplicative: Dist,
    #[serde(default)]
    pub additive: Dist,
}

impl MarketConfig {
    fn curve(&self, market: Market) -> Result<RevenueCurve> {
        match &self.demand {
            DemandConfig::Linear { b, c } => {
                let lower = self.d_lower.unwrap_or(0.0);
                let upper = self.d_upper.ok_or_else(|| {
                    Error::Config(format!("{market}: linear demand needs d_upper"))
                })?;
                Ok(RevenueCurve::linear(market, *b, *c, lower, upper))
            }
            DemandConfig::Beta { beta, p_max, p_min } => {
                if self.d_lower.is_some() || self.d_upper.is_some() {
                    return Err(Error::Config(format!(
                        "{market}: beta demand derives its own bounds"
                    )));
                }
                Ok(RevenueCurve::beta_form(market, *beta, *p_max, *p_min))
            }
            DemandConfig::Tabulated { points } => {
                if self.d_lower.is_some() || self.d_upper.is_some() {
                    return Err(Error::Config(format!(
                        "{market}: tabulated demand derives its own bounds"
                    )));
                }
                RevenueCurve::tabulated(market, points.clone())
            }
        }
    }

    fn noise(&self) -> MarketNoise {
        MarketNoise {
            multiplicative: self.multiplicative.clone(),
            additive: self.additive.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Markets {
    pub on_site: MarketConfig,
    pub long_distance: MarketConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<InventoryGrid> {
        InventoryGrid::new(self.min, self.max, self.step)
    }
}

fn default_true() -> bool {
    true
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub name: String,
    pub horizon: usize,
    pub replenishment: Vec<f64>,
    #[serde(default = "default_true")]
    pub last_period_rule: bool,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    pub costs: CostSpec,
    pub grid: Option<GridConfig>,
    pub markets: Markets,
    #[serde(default)]
    pub correlation: Correlation,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Grid from the file, or `[-8, 8]` at step 0.05.
    pub fn inventory_grid(&self) -> Result<InventoryGrid> {
        match &self.grid {
            Some(g) => g.build(),
            None => InventoryGrid::new(-8.0, 8.0, 0.05),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions::with_nodes(self.quadrature_nodes)
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let q: Vec<f64> = match self.replenishment.len() {
            1 => vec![self.replenishment[0]; self.horizon],
            n if n == self.horizon => self.replenishment.clone(),
            n => {
                return Err(Error::Config(format!(
                    "replenishment has {n} entries for horizon {}",
                    self.horizon
                )))
            }
        };
        let on_site = self.markets.on_site.curve(Market::OnSite)?;
        let long_distance = self.markets.long_distance.curve(Market::LongDistance)?;
        let noise = NoiseModel {
            on_site: self.markets.on_site.noise(),
            long_distance: self.markets.long_distance.noise(),
            correlation: self.correlation,
        };
        Ok(ProblemSpec {
            name: self.name.clone(),
            periods: q
                .into_iter()
                .map(|replenishment| PeriodSpec {
                    replenishment,
                    on_site: on_site.clone(),
                    long_distance: long_distance.clone(),
                    noise: noise.clone(),
                })
                .collect(),
            costs: self.costs,
            last_period_rule: self.last_period_rule,
        })
    }
}

/// Specs shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("example1", include_str!("../specs/example1.toml")),
    ("additive", include_str!("../specs/additive.toml")),
    (
        "additive_onsite",
        include_str!("../specs/additive_onsite.toml"),
    ),
    ("additive_long", include_str!("../specs/additive_long.toml")),
    ("symmetric", include_str!("../specs/symmetric.toml")),
    (
        "correlated_negative",
        include_str!("../specs/correlated_negative.toml"),
    ),
    (
        "correlated_positive",
        include_str!("../specs/correlated_positive.toml"),
    ),
    ("unified", include_str!("../specs/unified.toml")),
];

pub fn bundled(name: &str) -> Option<SpecFile> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| SpecFile::parse(text).expect("bundled specs parse"))
}

/// The two-period instance used throughout the tests and the figure data.
pub fn example1_file() -> SpecFile {
    bundled("example1").expect("example1 is bundled")
}

pub fn example1() -> ProblemSpec {
    example1_file().to_spec().expect("example1 is well formed")
}

/// SHA-256 of the canonical JSON form of a spec.
pub fn spec_hash(spec: &ProblemSpec) -> String {
    let json = serde_json::to_vec(spec).expect("specs serialize");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn bundled_specs_load_and_validate() {
        for (name, _) in BUNDLED {
            let file = bundled(name).unwrap();
            let spec = file.to_spec().unwrap();
            let report = validate(&spec);
            assert!(report.is_ok(), "{name}: {report}");
            assert!(file.grid.is_some(), "{name} has no grid");
        }
    }

    #[test]
    fn example1_contents() {
        let spec = example1();
        assert_eq!(spec.horizon(), 2);
        assert_eq!(spec.period(1).replenishment, 2.0);
        assert_eq!(spec.period(2).replenishment, 1.0);
        assert_eq!(spec.costs.emergency, 10.0);
        assert!(spec.last_period_rule);
        assert!(spec.is_multiplicative_only());
        assert!((spec.period(1).on_site.revenue(2.0).unwrap() - 18.0).abs() < 1e-12);
    }

    #[test]
    fn broadcast_replenishment() {
        let mut f = example1_file();
        f.horizon = 3;
        f.replenishment = vec![1.5];
        let spec = f.to_spec().unwrap();
        assert_eq!(spec.horizon(), 3);
        assert!(spec.periods.iter().all(|p| p.replenishment == 1.5));
        f.replenishment = vec![1.0, 2.0];
        assert!(f.to_spec().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = bundled_text("example1").replace("discount = 0.8", "discount = 0.8\nfoo = 1");
        assert!(SpecFile::parse(&text).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = spec_hash(&example1());
        assert_eq!(a, spec_hash(&example1()));
        let mut s = example1();
        s.costs.holding = 2.5;
        assert_ne!(a, spec_hash(&s));
        assert_eq!(a.len(), 64);
    }

    fn bundled_text(name: &str) -> &'static str {
        BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1
    }
}
