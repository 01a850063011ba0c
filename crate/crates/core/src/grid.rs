//! Uniform inventory grid and piecewise-linear functions on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `k * step` for `k` in `k_min..=k_max`, so zero is always a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InventoryGrid {
    pub step: f64,
    pub k_min: i64,
    pub k_max: i64,
}

impl InventoryGrid {
    /// Smallest grid with the given step covering `[i_min, i_max]` and zero.
    pub fn new(i_min: f64, i_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Grid(format!("step must be positive, got {step}")));
        }
        if !(i_min.is_finite() && i_max.is_finite() && i_min < i_max) {
            return Err(Error::Grid(format!("bad bounds [{i_min}, {i_max}]")));
        }
        let k_min = ((i_min.min(0.0) / step) + 1e-9).floor() as i64;
        let k_max = ((i_max.max(0.0) / step) - 1e-9).ceil() as i64;
        if k_max - k_min < 2 {
            return Err(Error::Grid("grid needs at least three points".into()));
        }
        if k_max - k_min > 2_000_000 {
            return Err(Error::Grid(format!(
                "{} points is too many",
                k_max - k_min + 1
            )));
        }
        Ok(InventoryGrid { step, k_min, k_max })
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.k_min as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.k_max as f64 * self.step
    }

    #[inline]
    pub fn point(&self, idx: usize) -> f64 {
        (self.k_min + idx as i64) as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Index of the node closest to `x`, if `x` lies on the grid within 1e-9 steps.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = (x / self.step).round();
        if ((x / self.step) - k).abs() > 1e-9 {
            return None;
        }
        let k = k as i64;
        (self.k_min..=self.k_max)
            .contains(&k)
            .then(|| (k - self.k_min) as usize)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min() - 1e-12 && x <= self.max() + 1e-12
    }

    /// Same bounds, step halved.
    pub fn refined(&self) -> Self {
        InventoryGrid {
            step: 0.5 * self.step,
            k_min: 2 * self.k_min,
            k_max: 2 * self.k_max,
        }
    }
}

/// Piecewise-linear interpolant of grid values, extrapolated linearly with
/// the boundary slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub grid: InventoryGrid,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(grid: InventoryGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "value count must match grid");
        PiecewiseLinear { grid, values }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let u = x / self.grid.step - self.grid.k_min as f64;
        let cell = (u.floor() as i64).clamp(0, n as i64 - 2) as usize;
        let frac = u - cell as f64;
        let v0 = self.values[cell];
        v0 + frac * (self.values[cell + 1] - v0)
    }

    /// Slope of cell `i` (between nodes `i` and `i + 1`).
    pub fn cell_slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / self.grid.step
    }

    /// Largest second difference, positive values mean a concavity breach.
    pub fn max_second_difference(&self) -> f64 {
        self.values
            .windows(3)
            .map(|w| w[0] + w[2] - 2.0 * w[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Concave up to `rel_tol * max|V|`.
    pub fn is_concave(&self, rel_tol: f64) -> bool {
        self.values.len() < 3 || self.max_second_difference() <= rel_tol * self.max_abs().max(1.0)
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn interpolant_is_exact_at_nodes_and_between(vals in prop::collection::vec(-50.0f64..50.0, 5), t in 0.0f64..1.0) {
            let g = InventoryGrid::new(-1.0, 1.0, 0.5).unwrap();
            let f = PiecewiseLinear::new(g, vals.clone());
            for (i, v) in vals.iter().enumerate() {
                prop_assert!((f.eval(g.point(i)) - v).abs() <= 1e-12);
            }
            let x = g.point(1) + t * g.step;
            let expected = vals[1] + t * (vals[2] - vals[1]);
            prop_assert!((f.eval(x) - expected).abs() <= 1e-9);
        }
    }
}
