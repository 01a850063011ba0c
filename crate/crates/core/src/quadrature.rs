//! Finite node/weight representations of the demand noise.
//!
//! Truncated normals are discretized with Gauss-Legendre nodes on the support,
//! weighted by the normal density. The underlying normal's location is solved
//! for so that the continuous truncated law has the requested mean; a final
//! rescale (multiplicative) or shift (additive) then makes the discrete mean
//! exact to rounding.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Correlation, Dist, Market, NoiseRole, PeriodSpec};

pub const DEFAULT_NODES: usize = 32;

/// Discrete law of one noise component.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteNoise {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Declared support; a point mass has `lo == hi`.
    pub support: (f64, f64),
}

impl DiscreteNoise {
    pub fn point(v: f64) -> Self {
        DiscreteNoise {
            nodes: vec![v],
            weights: vec![1.0],
            support: (v, v),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn mean(&self) -> f64 {
        expect(|v| v, self)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        expect(|v| (v - m) * (v - m), self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `sum_i w_i f(v_i)`.
pub fn expect(f: impl Fn(f64) -> f64, dn: &DiscreteNoise) -> f64 {
    dn.iter().map(|(v, w)| w * f(v)).sum()
}

/// Mean of `N(mu, sigma^2)` truncated to `(lo, hi)`.
pub fn truncated_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi < mu {
        // reflect so the window sits in the upper tail
        return -truncated_normal_mean(-mu, sigma, -hi, -lo);
    }
    let n = Normal::standard();
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    // use the upper tail when it is better conditioned
    let mass = if a > 0.0 {
        n.sf(a) - n.sf(b)
    } else {
        n.cdf(b) - n.cdf(a)
    };
    mu + sigma * (n.pdf(a) - n.pdf(b)) / mass
}

/// Location of the underlying normal whose truncation to `(lo, hi)` has mean `target`.
pub fn solve_location(target: f64, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |mu: f64| truncated_normal_mean(mu, sigma, lo, hi) - target;
    let mut reach = 8.0;
    let (mut a, mut b) = (lo - reach * sigma, hi + reach * sigma);
    // widen while the bracket misses the target; the densities underflow past ~37 sigma
    while (f(a) > 0.0 || f(b) < 0.0) && reach < 32.0 {
        reach += 4.0;
        a = lo - reach * sigma;
        b = hi + reach * sigma;
    }
    let (fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa > 0.0 || fb < 0.0 {
        return Err(Error::Noise(format!(
            "no normal with sigma={sigma} truncated to ({lo}, {hi}) has mean {target}"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if truncated_normal_mean(m, sigma, lo, hi) < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * (1.0 + m.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Discretizes one noise component with `n_nodes` Gauss-Legendre nodes.
pub fn discretize(dist: &Dist, role: NoiseRole, n_nodes: usize) -> Result<DiscreteNoise> {
    let target = role.target_mean();
    let (sigma, lo, hi) = match *dist {
        Dist::PointMass => return Ok(DiscreteNoise::point(target)),
        Dist::TruncatedNormal { sigma, lo, hi } => (sigma, lo, hi),
    };
    if !(hi > lo) {
        return Err(Error::Noise(format!("support ({lo}, {hi}) has zero width")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Noise(format!("sigma must be positive, got {sigma}")));
    }
    let n = NonZeroUsize::new(n_nodes)
        .filter(|n| n.get() >= 2)
        .ok_or_else(|| Error::Noise(format!("need at least 2 nodes, got {n_nodes}")))?;
    let mu = solve_location(target, sigma, lo, hi)?;
    let normal = Normal::new(mu, sigma).map_err(|e| Error::Noise(e.to_string()))?;
    let rule = GaussLegendre::new(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut weights = Vec::with_capacity(n_nodes);
    for &(x, w) in rule.as_node_weight_pairs() {
        let v = mid + half * x;
        nodes.push(v);
        weights.push(w * half * normal.pdf(v));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let raw: f64 = nodes.iter().zip(&weights).map(|(v, w)| v * w).sum();
    match role {
        NoiseRole::Multiplicative => {
            let k = target / raw;
            nodes.iter_mut().for_each(|v| *v *= k);
        }
        NoiseRole::Additive => {
            let s = target - raw;
            nodes.iter_mut().for_each(|v| *v += s);
        }
    }
    if nodes.iter().any(|&v| v <= lo || v >= hi) {
        return Err(Error::Noise(format!(
            "moment correction pushed nodes outside ({lo}, {hi}); use more nodes"
        )));
    }
    Ok(DiscreteNoise {
        nodes,
        weights,
        support: (lo, hi),
    })
}

/// Joint law of a pair, one per market.
#[derive(Clone, Debug, PartialEq)]
pub struct JointNoise {
    pub pairs: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl JointNoise {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn marginal_means(&self) -> (f64, f64) {
        self.pairs
            .iter()
            .zip(&self.weights)
            .fold((0.0, 0.0), |(a, b), (&(s, l), &w)| (a + w * s, b + w * l))
    }

    /// Weighted Pearson correlation; `None` if either coordinate is constant.
    pub fn correlation(&self) -> Option<f64> {
        let (ms, ml) = self.marginal_means();
        let (mut vs, mut vl, mut c) = (0.0, 0.0, 0.0);
        for (&(s, l), &w) in self.pairs.iter().zip(&self.weights) {
            vs += w * (s - ms) * (s - ms);
            vl += w * (l - ml) * (l - ml);
            c += w * (s - ms) * (l - ml);
        }
        if vs <= 0.0 || vl <= 0.0 {
            return None;
        }
        Some(c / (vs * vl).sqrt())
    }
}

/// Combines the two markets' multiplicative laws.
///
/// Under perfect linear correlation `eps_s = 1 + a (eps_l - 1)` and only the
/// long-distance nodes are used; the on-site law supplies the support that
/// the induced values must respect.
pub fn join(s: &DiscreteNoise, l: &DiscreteNoise, corr: Correlation) -> Result<JointNoise> {
    match corr {
        Correlation::Independent => {
            let mut pairs = Vec::with_capacity(s.len() * l.len());
            let mut weights = Vec::with_capacity(s.len() * l.len());
            for (vs, ws) in s.iter() {
                for (vl, wl) in l.iter() {
                    pairs.push((vs, vl));
                    weights.push(ws * wl);
                }
            }
            Ok(JointNoise { pairs, weights })
        }
        Correlation::PerfectLinear { a } => {
            let (lo, hi) = s.support;
            let mut pairs = Vec::with_capacity(l.len());
            for (vl, _) in l.iter() {
                let vs = 1.0 + a * (vl - 1.0);
                let inside = if lo == hi {
                    (vs - lo).abs() <= 1e-12
                } else {
                    vs > lo && vs < hi
                };
                if !inside {
                    return Err(Error::Noise(format!(
                        "correlated on-site value {vs} outside support ({lo}, {hi})"
                    )));
                }
                pairs.push((vs, vl));
            }
            Ok(JointNoise {
                pairs,
                weights: l.weights.clone(),
            })
        }
    }
}

/// Everything the stage objective needs about one period's noise, flattened
/// for the hot loop.
#[derive(Clone, Debug)]
pub struct StageNoise {
    /// `(eps_s, eps_l)`.
    pub eps: JointNoise,
    /// `(omega_s, omega_l)`, always independent.
    pub omega: JointNoise,
    /// `[eps_s, omega_s, w]` for the holding-cost term.
    pub(crate) holding: Vec<[f64; 3]>,
    /// `[eps_s, eps_l, omega_s + omega_l, w]` for the continuation term.
    pub(crate) cont: Vec<[f64; 4]>,
    /// Continuation terms when `d_l = 0`: `[eps_s, omega_sum, w]`.
    pub(crate) cont_s: Vec<[f64; 3]>,
    /// Continuation terms when `d_s = 0`: `[eps_l, omega_sum, w]`.
    pub(crate) cont_l: Vec<[f64; 3]>,
    /// Continuation terms when both are closed: `[omega_sum, w]`.
    pub(crate) cont_none: Vec<[f64; 2]>,
}

impl StageNoise {
    pub fn for_period(period: &PeriodSpec, n_nodes: usize) -> Result<Self> {
        Self::build(period, n_nodes, None)
    }

    /// Same as `for_period` but with `relax`'s multiplicative noise replaced by 1.
    pub fn relaxed(period: &PeriodSpec, n_nodes: usize, relax: Market) -> Result<Self> {
        Self::build(period, n_nodes, Some(relax))
    }

    fn build(period: &PeriodSpec, n_nodes: usize, relax: Option<Market>) -> Result<Self> {
        let noise = &period.noise;
        let es = discretize(
            &noise.on_site.multiplicative,
            NoiseRole::Multiplicative,
            n_nodes,
        )?;
        let el = discretize(
            &noise.long_distance.multiplicative,
            NoiseRole::Multiplicative,
            n_nodes,
        )?;
        let ws = discretize(&noise.on_site.additive, NoiseRole::Additive, n_nodes)?;
        let wl = discretize(&noise.long_distance.additive, NoiseRole::Additive, n_nodes)?;
        let mut eps = join(&es, &el, noise.correlation)?;
        if let Some(m) = relax {
            for p in eps.pairs.iter_mut() {
                match m {
                    Market::OnSite => p.0 = 1.0,
                    Market::LongDistance => p.1 = 1.0,
                }
            }
        }
        let omega = join(&ws, &wl, Correlation::Independent)?;
        Ok(Self::flatten(eps, omega))
    }

    /// Builds directly from joint laws; used by tests and custom oracles.
    pub fn from_joint(eps: JointNoise, omega: JointNoise) -> Self {
        Self::flatten(eps, omega)
    }

    fn flatten(eps: JointNoise, omega: JointNoise) -> Self {
        let eps_s = merge(eps.pairs.iter().zip(&eps.weights).map(|(p, &w)| (p.0, w)));
        let eps_l = merge(eps.pairs.iter().zip(&eps.weights).map(|(p, &w)| (p.1, w)));
        let omega_s = merge(
            omega
                .pairs
                .iter()
                .zip(&omega.weights)
                .map(|(p, &w)| (p.0, w)),
        );
        let omega_sum = merge(
            omega
                .pairs
                .iter()
                .zip(&omega.weights)
                .map(|(p, &w)| (p.0 + p.1, w)),
        );

        let mut holding = Vec::with_capacity(eps_s.len() * omega_s.len());
        for &(e, we) in &eps_s {
            for &(o, wo) in &omega_s {
                holding.push([e, o, we * wo]);
            }
        }
        let mut cont = Vec::with_capacity(eps.len() * omega_sum.len());
        for (&(e_s, e_l), &we) in eps.pairs.iter().zip(&eps.weights) {
            for &(o, wo) in &omega_sum {
                cont.push([e_s, e_l, o, we * wo]);
            }
        }
        let outer = |marg: &[(f64, f64)]| -> Vec<[f64; 3]> {
            let mut v = Vec::with_capacity(marg.len() * omega_sum.len());
            for &(e, we) in marg {
                for &(o, wo) in &omega_sum {
                    v.push([e, o, we * wo]);
                }
            }
            v
        };
        let cont_s = outer(&eps_s);
        let cont_l = outer(&eps_l);
        let cont_none = omega_sum.iter().map(|&(o, w)| [o, w]).collect();
        StageNoise {
            eps,
            omega,
            holding,
            cont,
            cont_s,
            cont_l,
            cont_none,
        }
    }

    /// Expected on-site multiplicative factor; 1 up to rounding.
    pub fn mean_eps_s(&self) -> f64 {
        self.holding.iter().map(|h| h[0] * h[2]).sum()
    }

    pub fn holding_terms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.holding.iter().map(|h| (h[0], h[1], h[2]))
    }
}

/// Marginal of a weighted sample with exactly repeated values merged.
fn merge(it: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = it.collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::Normal;

    fn eps_s() -> Dist {
        Dist::TruncatedNormal {
            sigma: 0.6,
            lo: 0.0,
            hi: 2.0,
        }
    }

    /// Rejection sampler for a truncated normal; independent of the quadrature.
    fn mc_samples(mu: f64, sigma: f64, lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
        use rand::distributions::Distribution;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_normal(mu, sigma);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = normal.sample(&mut rng);
            if x > lo && x < hi {
                out.push(x);
            }
        }
        out
    }

    fn rand_normal(mu: f64, sigma: f64) -> Normal {
        Normal::new(mu, sigma).unwrap()
    }

    #[test]
    fn point_mass_is_single_node() {
        let d = discretize(&Dist::PointMass, NoiseRole::Multiplicative, 17).unwrap();
        assert_eq!(d.nodes, vec![1.0]);
        assert_eq!(d.weights, vec![1.0]);
        let d = discretize(&Dist::PointMass, NoiseRole::Additive, 3).unwrap();
        assert_eq!(d.nodes, vec![0.0]);
    }

    #[test]
    fn symmetric_truncation_keeps_center() {
        let mu = solve_location(1.0, 0.6, 0.0, 2.0).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example_noise_moments_match_monte_carlo() {
        let d = discretize(&eps_s(), NoiseRole::Multiplicative, 32).unwrap();
        assert!((d.mean() - 1.0).abs() < 1e-12);
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.nodes.iter().all(|&v| v > 0.0 && v < 2.0));
        let xs = mc_samples(1.0, 0.6, 0.0, 2.0, 10_000_000, 11);
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        assert!(
            (d.variance() - var).abs() < 1e-3,
            "{} vs {}",
            d.variance(),
            var
        );
        let call = xs.iter().map(|x| (x - 1.0).max(0.0)).sum::<f64>() / n;
        let q = expect(|v| (v - 1.0).max(0.0), &d);
        assert!((q - call).abs() < 1e-3, "{q} vs {call}");
    }

    #[test]
    fn asymmetric_additive_is_centered() {
        let dist = Dist::TruncatedNormal {
            sigma: 1.0,
            lo: -1.0,
            hi: 3.0,
        };
        assert!(truncated_normal_mean(0.0, 1.0, -1.0, 3.0) > 0.0);
        let d = discretize(&dist, NoiseRole::Additive, 32).unwrap();
        assert!(d.mean().abs() < 1e-12);
        assert!(d.nodes.iter().all(|&v| v > -1.0 && v < 3.0));
    }

    #[test]
    fn location_solve_matches_sampled_mean() {
        let mu = solve_location(0.0, 1.0, -1.0, 3.0).unwrap();
        let xs = mc_samples(mu, 1.0, -1.0, 3.0, 2_000_000, 3);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 3e-3, "{m}");
    }

    #[test]
    fn rejects_degenerate_support() {
        let dist = Dist::TruncatedNormal {
            sigma: 1.0,
            lo: 1.0,
            hi: 1.0,
        };
        assert!(discretize(&dist, NoiseRole::Multiplicative, 8).is_err());
        assert!(discretize(&eps_s(), NoiseRole::Multiplicative, 1).is_err());
    }

    #[test]
    fn expectation_basics() {
        let d = discretize(&eps_s(), NoiseRole::Multiplicative, 32).unwrap();
        assert!((expect(|v| v, &d) - 1.0).abs() < 1e-12);
        assert!((expect(|_| 7.0, &d) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn join_point_masses() {
        let j = join(
            &DiscreteNoise::point(1.0),
            &DiscreteNoise::point(1.0),
            Correlation::Independent,
        )
        .unwrap();
        assert_eq!(j.pairs, vec![(1.0, 1.0)]);
        assert_eq!(j.weights, vec![1.0]);
    }

    #[test]
    fn perfect_correlation_pairs() {
        let d = discretize(&eps_s(), NoiseRole::Multiplicative, 16).unwrap();
        let j = join(&d, &d, Correlation::PerfectLinear { a: 1.0 }).unwrap();
        assert!(j.pairs.iter().all(|&(s, l)| (s - l).abs() < 1e-15));
        assert!((j.correlation().unwrap() - 1.0).abs() < 1e-9);
        let j = join(&d, &d, Correlation::PerfectLinear { a: -0.5 }).unwrap();
        assert!((j.correlation().unwrap() + 1.0).abs() < 1e-9);

        let l = DiscreteNoise {
            nodes: vec![1.4, 0.6],
            weights: vec![0.5, 0.5],
            support: (0.0, 2.0),
        };
        let j = join(&d, &l, Correlation::PerfectLinear { a: -0.5 }).unwrap();
        assert!((j.pairs[0].0 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn perfect_correlation_support_violation() {
        let d = discretize(&eps_s(), NoiseRole::Multiplicative, 16).unwrap();
        assert!(join(&d, &d, Correlation::PerfectLinear { a: 2.0 }).is_err());
    }

    #[test]
    fn independent_marginals_keep_moments() {
        let s = discretize(&eps_s(), NoiseRole::Multiplicative, 8).unwrap();
        let l = discretize(
            &Dist::TruncatedNormal {
                sigma: 0.9,
                lo: 0.0,
                hi: 2.0,
            },
            NoiseRole::Multiplicative,
            8,
        )
        .unwrap();
        let j = join(&s, &l, Correlation::Independent).unwrap();
        assert_eq!(j.len(), 64);
        let (ms, ml) = j.marginal_means();
        assert!((ms - 1.0).abs() < 1e-12 && (ml - 1.0).abs() < 1e-12);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn moments_are_exact(sigma in 0.05f64..1.5, half in 0.2f64..1.0, skew in 0.0f64..1.0, n in 4usize..40) {
            let lo = 1.0 - half;
            let hi = 1.0 + half * (1.0 + skew);
            let d = match discretize(&Dist::TruncatedNormal { sigma, lo, hi }, NoiseRole::Multiplicative, n) {
                Ok(d) => d,
                // too few nodes for a narrow law is an error
                Err(Error::Noise(msg)) if msg.contains("use more nodes") => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!((d.mean() - 1.0).abs() <= 1e-12);
            prop_assert!((d.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(d.nodes.iter().all(|&v| v > lo && v < hi));
        }

        #[test]
        fn additive_moments_are_exact(sigma in 0.05f64..2.0, lo in -3.0f64..-0.1, hi in 0.1f64..3.0) {
            let d = match discretize(&Dist::TruncatedNormal { sigma, lo, hi }, NoiseRole::Additive, 24) {
                Ok(d) => d,
                Err(Error::Noise(msg)) if msg.contains("use more nodes") => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(d.mean().abs() <= 1e-12);
        }

        #[test]
        fn quadrature_converges_for_smooth_integrands(sigma in 0.2f64..1.0, k in 0.5f64..3.0) {
            let dist = Dist::TruncatedNormal { sigma, lo: 0.0, hi: 2.0 };
            let d32 = discretize(&dist, NoiseRole::Multiplicative, 32).unwrap();
            let d64 = discretize(&dist, NoiseRole::Multiplicative, 64).unwrap();
            let f = |v: f64| (k * v).sin() + v * v;
            let a = expect(f, &d32);
            let b = expect(f, &d64);
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }

        #[test]
        fn perfect_correlation_sign(a in -1.0f64..1.0) {
            prop_assume!(a.abs() > 1e-3);
            let d = discretize(&Dist::TruncatedNormal { sigma: 0.6, lo: 0.0, hi: 2.0 }, NoiseRole::Multiplicative, 12).unwrap();
            let j = join(&d, &d, Correlation::PerfectLinear { a }).unwrap();
            let r = j.correlation().unwrap();
            prop_assert!((r - a.signum()).abs() <= 1e-9);
            for &(s, l) in &j.pairs {
                prop_assert!((s - 1.0 - a * (l - 1.0)).abs() <= 1e-15);
            }
        }
    }
}
