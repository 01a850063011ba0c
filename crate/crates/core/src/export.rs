//! CSV and JSON artifacts.
//!
//! Every CSV starts with `#` comment lines carrying the spec hash and solver
//! settings, so a file can be traced back to the run that produced it.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::spec_hash;
use crate::dp::Solution;
use crate::error::{Error, Result};

pub const SOLUTION_FORMAT: &str = "dualprice.solution.v1";

/// Provenance block written ahead of every CSV.
pub fn header(sol: &Solution, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let g = &sol.grid;
    let _ = writeln!(
        out,
        "# spec={} sha256={}",
        sol.spec.name,
        spec_hash(&sol.spec)
    );
    let _ = writeln!(
        out,
        "# grid_min={} grid_max={} grid_step={} nodes={}",
        fmt_num(g.min()),
        fmt_num(g.max()),
        fmt_num(g.step),
        sol.nodes
    );
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

/// Inventory levels are rounded to 1e-9 so grid points print cleanly.
pub fn fmt_inventory(x: f64) -> String {
    fmt_num((x * 1e9).round() / 1e9)
}

/// Shortest round-trip decimal form, `.` separator, no exponent surprises for zero.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// `t,I,V,d_s_star,d_l_star`, one row per period and grid point.
pub fn solution_csv(sol: &Solution) -> String {
    let mut out = header(sol, &[]);
    out.push_str("t,I,V,d_s_star,d_l_star\n");
    for t in 1..=sol.horizon() {
        for k in 0..sol.grid.len() {
            let _ = writeln!(
                out,
                "{t},{},{},{},{}",
                fmt_inventory(sol.grid.point(k)),
                fmt_num(sol.values[t - 1].values[k]),
                fmt_num(sol.d_s[t - 1][k]),
                fmt_num(sol.d_l[t - 1][k])
            );
        }
    }
    out
}

/// `I,d_s_star,d_l_star` for period `t` over `[lo, hi]` in steps of `step`,
/// using exact grid values where available.
pub fn policy_curve_csv(sol: &Solution, t: usize, lo: f64, hi: f64, step: f64) -> String {
    let mut out = header(
        sol,
        &[
            ("period", t.to_string()),
            (
                "range",
                format!("{}..{} step {}", fmt_num(lo), fmt_num(hi), fmt_num(step)),
            ),
        ],
    );
    out.push_str("I,d_s_star,d_l_star\n");
    let n = ((hi - lo) / step).round() as usize;
    for j in 0..=n {
        let i = lo + j as f64 * step;
        let (ds, dl) = sol
            .policy_on_grid(t, i)
            .unwrap_or_else(|| sol.policy_at(t, i));
        let _ = writeln!(out, "{},{},{}", fmt_inventory(i), fmt_num(ds), fmt_num(dl));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionEnvelope {
    pub format: String,
    pub spec_sha256: String,
    pub solver: SolverMeta,
    pub solution: Solution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverMeta {
    pub crate_version: String,
    pub nodes: usize,
    pub grid_points: usize,
    pub parallel: bool,
}

pub fn solution_json(sol: &Solution, parallel: bool) -> Result<String> {
    let env = SolutionEnvelope {
        format: SOLUTION_FORMAT.to_string(),
        spec_sha256: spec_hash(&sol.spec),
        solver: SolverMeta {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            nodes: sol.nodes,
            grid_points: sol.grid.len(),
            parallel,
        },
        solution: sol.clone(),
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

/// Parses a JSON envelope and checks its format tag, hash and table shapes.
pub fn parse_solution_json(text: &str) -> Result<Solution> {
    let env: SolutionEnvelope = serde_json::from_str(text)?;
    if env.format != SOLUTION_FORMAT {
        return Err(Error::Config(format!(
            "unknown solution format {:?}",
            env.format
        )));
    }
    let sol = env.solution;
    if spec_hash(&sol.spec) != env.spec_sha256 {
        return Err(Error::Config(
            "spec hash does not match the embedded spec".into(),
        ));
    }
    let n = sol.grid.len();
    let horizon = sol.spec.horizon();
    let shapes_ok = sol.values.len() == horizon
        && sol.d_s.len() == horizon
        && sol.d_l.len() == horizon
        && sol
            .values
            .iter()
            .all(|v| v.values.len() == n && v.grid == sol.grid)
        && sol.d_s.iter().chain(&sol.d_l).all(|p| p.len() == n);
    if !shapes_ok {
        return Err(Error::Config(
            "solution tables do not match the grid".into(),
        ));
    }
    Ok(sol)
}

pub fn load_solution(path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path)?;
    parse_solution_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
