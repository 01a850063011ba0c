//! One-period relaxations that strip one market's multiplicative noise.
//!
//! `B_l` evaluates the period with `eps_l = 1`, `B_s` with `eps_s = 1`, both
//! against the original `V_{t+1}`. Their opening sets coincide with the
//! original policy's, and the relaxed market's intensity is monotone in `I`.

use crate::dp::{Solution, SolverOptions, StagePolicy, TIE_TOL};
use crate::error::Result;
use crate::model::Market;
use crate::quadrature::StageNoise;

use super::thresholds::opening_index;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkPolicy {
    /// Market whose noise was removed.
    pub relaxed: Market,
    pub t: usize,
    pub d_s: Vec<f64>,
    pub d_l: Vec<f64>,
}

impl BenchmarkPolicy {
    pub fn policy(&self, m: Market) -> &[f64] {
        match m {
            Market::OnSite => &self.d_s,
            Market::LongDistance => &self.d_l,
        }
    }

    /// Largest drop of the relaxed market's intensity between adjacent nodes.
    pub fn max_decrease(&self) -> f64 {
        max_decrease(self.policy(self.relaxed))
    }
}

pub fn max_decrease(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

/// Maximizes the relaxed stage objective at every grid point of `sol`.
pub fn solve_benchmark(
    sol: &Solution,
    t: usize,
    relax: Market,
    opts: &SolverOptions,
) -> Result<BenchmarkPolicy> {
    let noise = StageNoise::relaxed(sol.spec.period(t), opts.nodes, relax)?;
    let stage = sol.stage(t, &noise);
    let policies: Vec<StagePolicy> = stage.optimize_grid(t, &sol.grid, opts)?;
    Ok(BenchmarkPolicy {
        relaxed: relax,
        t,
        d_s: policies.iter().map(|p| p.d_s).collect(),
        d_l: policies.iter().map(|p| p.d_l).collect(),
    })
}

/// Difference in first-open index between the original and benchmark
/// policies of `m`, or `None` when either never opens.
pub fn opening_offset(original: &[f64], bench: &[f64]) -> Option<i64> {
    let (a, _) = opening_index(original)?;
    let (b, _) = opening_index(bench)?;
    Some(a as i64 - b as i64)
}

/// Number of nodes where exactly one of the two policies is open, ignoring
/// nodes within one step of either opening index.
pub fn zero_set_mismatches(original: &[f64], bench: &[f64]) -> usize {
    let ka = opening_index(original).map(|(k, _)| k);
    let kb = opening_index(bench).map(|(k, _)| k);
    let near = |i: usize| {
        [ka, kb]
            .iter()
            .flatten()
            .any(|&k| (i as i64 - k as i64).abs() <= 1)
    };
    original
        .iter()
        .zip(bench)
        .enumerate()
        .filter(|(i, (a, b))| !near(*i) && ((**a > TIE_TOL) != (**b > TIE_TOL)))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::example1;
    use crate::dp::solve;
    use crate::grid::InventoryGrid;
    use crate::model::NoiseModel;

    #[test]
    fn deterministic_benchmark_matches_original() {
        let mut spec = example1();
        for p in spec.periods.iter_mut() {
            p.noise = NoiseModel::default();
        }
        let grid = InventoryGrid::new(-4.0, 4.0, 0.25).unwrap();
        let opts = SolverOptions::with_nodes(4);
        let sol = solve(&spec, &grid, &opts).unwrap();
        for m in Market::BOTH {
            let b = solve_benchmark(&sol, 1, m, &opts).unwrap();
            for k in 0..grid.len() {
                assert!((b.d_s[k] - sol.d_s[0][k]).abs() < 1e-9);
                assert!((b.d_l[k] - sol.d_l[0][k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_set_helpers() {
        let a = [0.0, 0.0, 0.0, 0.2, 0.5, 0.7];
        let b = [0.0, 0.0, 0.1, 0.3, 0.5, 0.7];
        assert_eq!(opening_offset(&a, &b), Some(1));
        assert_eq!(zero_set_mismatches(&a, &b), 0);
        let a = [0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.5];
        let c = [0.0, 0.4, 0.4, 0.4, 0.4, 0.4, 0.5];
        assert_eq!(opening_offset(&a, &c), Some(4));
        assert_eq!(zero_set_mismatches(&a, &c), 1);
        assert!((max_decrease(&[0.0, 0.5, 0.3, 0.9]) - 0.2).abs() < 1e-12);
    }
}
