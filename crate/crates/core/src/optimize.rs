//! Derivative-free maximization of concave functions on boxes.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// The endpoints are compared at the end so boundary optima are returned exactly.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    if hi - lo <= x_tol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    for e in [lo, hi] {
        let fe = f(e);
        if fe >= fx {
            x = e;
            fx = fe;
        }
    }
    (x, fx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Line-search resolution.
    pub line_tol: f64,
    /// Optima within `tie_tol * max(1, |f|)` of the best value count as ties.
    pub tie_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            line_tol: 1e-7,
            tie_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum2 {
    pub x: [f64; 2],
    pub value: f64,
}

/// Maximizes a concave `f` over the box `[lo, hi]` by golden-section search
/// on `phi(x0) = max_x1 f(x0, x1)`, itself found by golden-section search,
/// then applies the smallest-sum tie-break.
///
/// `phi` is concave whenever `f` is jointly concave, so the search cannot
/// stall on a ridge of a nonsmooth `f` the way cyclic line searches can.
pub fn maximize_box(
    f: impl Fn(f64, f64) -> f64,
    lo: [f64; 2],
    hi: [f64; 2],
    opts: &SearchOptions,
) -> Result<Maximum2> {
    let inner = |a: f64| golden_section_max(|b| f(a, b), lo[1], hi[1], opts.line_tol);
    let (a, _) = golden_section_max(|a| inner(a).1, lo[0], hi[0], opts.line_tol);
    let (b, fx) = inner(a);
    if !fx.is_finite() {
        return Err(Error::NonConvergence {
            d_s: a,
            d_l: b,
            value: fx,
        });
    }
    let g = |p: [f64; 2]| f(p[0], p[1]);
    let x = tie_break(&g, [a, b], fx, lo, opts.tie_tol * fx.abs().max(1.0));
    Ok(Maximum2 { x, value: g(x) })
}

/// Moves toward smaller coordinates while the value stays within `slack` of
/// `best`. For concave `f` the admissible part of each ray is an interval,
/// so bisection finds its far end.
fn tie_break(
    g: &impl Fn([f64; 2]) -> f64,
    mut x: [f64; 2],
    best: f64,
    lo: [f64; 2],
    slack: f64,
) -> [f64; 2] {
    let ok = |p: [f64; 2]| g(p) >= best - slack;
    for u in [[-1.0, -1.0], [-1.0, 0.0], [0.0, -1.0]] {
        let tmax = (0..2)
            .filter(|&i| u[i] < 0.0)
            .map(|i| x[i] - lo[i])
            .fold(f64::INFINITY, f64::min);
        if !(tmax > 0.0) {
            continue;
        }
        let step = |t: f64| [(x[0] + t * u[0]).max(lo[0]), (x[1] + t * u[1]).max(lo[1])];
        if ok(step(tmax)) {
            x = step(tmax);
            continue;
        }
        let (mut a, mut b) = (0.0, tmax);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if ok(step(m)) {
                a = m;
            } else {
                b = m;
            }
        }
        x = step(a);
    }
    x
}

/// One-dimensional counterpart of `maximize_box`; ties go to the smaller argument.
pub fn maximize_interval(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    opts: &SearchOptions,
) -> (f64, f64) {
    let (x, fx) = golden_section_max(&f, lo, hi, opts.line_tol);
    let slack = opts.tie_tol * fx.abs().max(1.0);
    if f(lo) >= fx - slack {
        return (lo, f(lo));
    }
    let (mut a, mut b) = (lo, x);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f(m) >= fx - slack {
            b = m;
        } else {
            a = m;
        }
    }
    (b, f(b))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_grid_oracle_on_concave_quadratics(
            cx in -2.0f64..11.0, cy in -2.0f64..11.0, k in -0.9f64..0.9, s in 0.2f64..3.0
        ) {
            let f = |a: f64, b: f64| {
                let (u, v) = (a - cx, b - cy);
                -(s * u * u + v * v + 2.0 * k * s.sqrt() * u * v)
            };
            let m = maximize_box(f, [0.0, 0.0], [9.0, 9.0], &SearchOptions::default()).unwrap();
            let mut best = f64::NEG_INFINITY;
            for i in 0..=900 {
                for j in (0..=900).step_by(3) {
                    best = best.max(f(i as f64 * 0.01, j as f64 * 0.01));
                }
            }
            prop_assert!(m.value >= best - 1e-6);
        }
    }
}
