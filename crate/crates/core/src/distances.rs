//! Total variation, variational distance between convex hulls, the lower
//! bound `α + β >= 1 - var([Θ0], [Θ1])` with a test attaining it, and the
//! Kolmogorov–Smirnov distance between the named densities.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::lp::LinearProgram;
use crate::measures::{DensitySpec, FiniteMeasure};
use crate::numeric::bisect;

/// Tolerance for the hull-distance invariants.
pub const HULL_TOL: f64 = 1e-8;

/// `½ Σ |p_j - q_j|`.
pub fn total_variation(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    if p.alphabet_size() != q.alphabet_size() {
        return validation(format!(
            "alphabet sizes differ ({} vs {})",
            p.alphabet_size(),
            q.alphabet_size()
        ));
    }
    let l1: f64 = p
        .weights()
        .iter()
        .zip(q.weights())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// Closest pair of mixtures between two convex hulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullDistanceResult {
    /// `min TV(Σ λ_i P_i, Σ μ_j Q_j)` over convex weights.
    pub value: f64,
    /// Convex weights over the first set.
    pub mixture_p: Vec<f64>,
    /// Convex weights over the second set.
    pub mixture_q: Vec<f64>,
    pub lp_iterations: usize,
}

fn check_sets(a: &[FiniteMeasure], b: &[FiniteMeasure]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return validation("hypothesis and alternative sets must be nonempty");
    }
    let k = a[0].alphabet_size();
    if a.iter().chain(b).any(|m| m.alphabet_size() != k) {
        return validation("all measures must share one alphabet size");
    }
    Ok(k)
}

/// Variational distance between the convex hulls of `a` and `b`.
///
/// The absolute values are linearized with one auxiliary variable per atom:
/// minimize `½ Σ t_j` subject to `t_j >= ±(Σ λ_i p_ij - Σ μ_l q_lj)`.
pub fn hull_variation(a: &[FiniteMeasure], b: &[FiniteMeasure]) -> Result<HullDistanceResult> {
    let k = check_sets(a, b)?;
    let (na, nb) = (a.len(), b.len());
    let nvars = na + nb + k;
    let mut lp = LinearProgram::new(nvars);
    for t in &mut lp.objective[na + nb..] {
        *t = 0.5;
    }
    for j in 0..k {
        let mut pos = vec![0.0; nvars];
        for (i, p) in a.iter().enumerate() {
            pos[i] = p.weights()[j];
        }
        for (l, q) in b.iter().enumerate() {
            pos[na + l] = -q.weights()[j];
        }
        let mut neg: Vec<f64> = pos.iter().map(|v| -v).collect();
        pos[na + nb + j] = -1.0;
        neg[na + nb + j] = -1.0;
        lp.add_le(pos, 0.0);
        lp.add_le(neg, 0.0);
    }
    let mut sum_a = vec![0.0; nvars];
    sum_a[..na].iter_mut().for_each(|v| *v = 1.0);
    lp.add_eq(sum_a, 1.0);
    let mut sum_b = vec![0.0; nvars];
    sum_b[na..na + nb].iter_mut().for_each(|v| *v = 1.0);
    lp.add_eq(sum_b, 1.0);

    let sol = lp.solve()?;
    let lambda = simplex_weights(&sol.x[..na]);
    let mu = simplex_weights(&sol.x[na..na + nb]);
    let p_star = FiniteMeasure::mixture(a, &lambda)?;
    let q_star = FiniteMeasure::mixture(b, &mu)?;
    let value = total_variation(&p_star, &q_star)?;
    if (value - sol.objective).abs() > HULL_TOL {
        return Err(Error::Numeric {
            message: format!(
                "LP objective {} disagrees with mixture distance {value}",
                sol.objective
            ),
            iterations: sol.iterations,
        });
    }
    Ok(HullDistanceResult {
        value,
        mixture_p: lambda,
        mixture_q: mu,
        lp_iterations: sol.iterations,
    })
}

fn simplex_weights(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    clipped.iter().map(|v| v / s).collect()
}

/// `1 - var([A], [B])`: no test on one observation has `α + β` below this.
pub fn kraft_bound(a: &[FiniteMeasure], b: &[FiniteMeasure]) -> Result<f64> {
    Ok(1.0 - hull_variation(a, b)?.value)
}

/// Randomized test on a single observation from a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test {
    /// Probability of rejecting the hypothesis when atom `j` is observed.
    pub reject_prob: Vec<f64>,
}

impl Test {
    pub fn new(reject_prob: Vec<f64>) -> Result<Self> {
        if reject_prob.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return validation("reject probabilities must lie in [0, 1]");
        }
        Ok(Self { reject_prob })
    }

    /// Type I error `Σ p_j φ_j` under a hypothesis member.
    pub fn alpha(&self, p: &FiniteMeasure) -> f64 {
        p.weights().iter().zip(&self.reject_prob).map(|(w, r)| w * r).sum()
    }

    /// Type II error `Σ q_j (1 - φ_j)` under an alternative member.
    pub fn beta(&self, q: &FiniteMeasure) -> f64 {
        q.weights()
            .iter()
            .zip(&self.reject_prob)
            .map(|(w, r)| w * (1.0 - r))
            .sum()
    }

    /// Worst-case errors over sets.
    pub fn worst_case(&self, a: &[FiniteMeasure], b: &[FiniteMeasure]) -> (f64, f64) {
        let alpha = a.iter().map(|p| self.alpha(p)).fold(0.0, f64::max);
        let beta = b.iter().map(|q| self.beta(q)).fold(0.0, f64::max);
        (alpha, beta)
    }
}

/// Likelihood-ratio test between the closest hull mixtures `P*`, `Q*`:
/// reject where `q*_j > p*_j`, accept where `q*_j < p*_j`, reject with
/// probability ½ on ties.
pub fn optimal_test(a: &[FiniteMeasure], b: &[FiniteMeasure]) -> Result<(Test, HullDistanceResult)> {
    let hull = hull_variation(a, b)?;
    let p = FiniteMeasure::mixture(a, &hull.mixture_p)?;
    let q = FiniteMeasure::mixture(b, &hull.mixture_q)?;
    let reject_prob = p
        .weights()
        .iter()
        .zip(q.weights())
        .map(|(pj, qj)| {
            if (qj - pj).abs() <= 1e-15 {
                0.5
            } else if qj > pj {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok((Test { reject_prob }, hull))
}

/// Sorted points of `[0,1]` between which `f1 - f2` keeps a constant sign.
fn sign_change_points(d1: &DensitySpec, d2: &DensitySpec) -> Vec<f64> {
    let mut grid = d1.feature_points();
    grid.extend(d2.feature_points());
    let samples = 256 * (d1.max_frequency() + d2.max_frequency() + 1) as usize;
    grid.extend((1..samples).map(|j| j as f64 / samples as f64));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let diff = |x: f64| d1.density(x) - d2.density(x);
    let mut pts = grid.clone();
    for w in grid.windows(2) {
        // Evaluate just inside the interval so jump points are attributed
        // to the correct side.
        let (a, b) = (w[0], w[1]);
        let eps = 1e-12 * (b - a);
        let (fa, fb) = (diff(a + eps), diff(b - eps));
        if fa * fb < 0.0 {
            pts.push(bisect(&diff, a + eps, b - eps));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `sup_x |F_1(x) - F_2(x)|` over `(0,1)`.
///
/// The supremum is attained where `f_1 - f_2` changes sign (or at a jump of
/// a density), so `F_1 - F_2` is evaluated exactly at those points.
pub fn ks_distance(spec1: &DensitySpec, spec2: &DensitySpec) -> Result<f64> {
    spec1.validate()?;
    spec2.validate()?;
    let best = sign_change_points(spec1, spec2)
        .into_iter()
        .map(|x| (spec1.cdf(x) - spec2.cdf(x)).abs())
        .fold(0.0, f64::max);
    Ok(best)
}

/// `½ ∫ |f_1 - f_2|` over `(0,1)`, exact up to root location.
pub fn density_total_variation(spec1: &DensitySpec, spec2: &DensitySpec) -> Result<f64> {
    spec1.validate()?;
    spec2.validate()?;
    let pts = sign_change_points(spec1, spec2);
    let l1: f64 = pts
        .windows(2)
        .map(|w| (spec1.mass(w[0], w[1]) - spec2.mass(w[0], w[1])).abs())
        .sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::normalize;
    use crate::numeric::adaptive_simpson;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fm(w: &[f64]) -> FiniteMeasure {
        FiniteMeasure::new(w.to_vec()).unwrap()
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&fm(&[1.0, 0.0]), &fm(&[0.0, 1.0])).unwrap(), 1.0);
        let p = fm(&[0.2, 0.3, 0.5]);
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let tv = total_variation(&fm(&[0.5, 0.5]), &fm(&[0.7, 0.3])).unwrap();
        assert!((tv - 0.2).abs() < 1e-12);
        assert!(total_variation(&fm(&[1.0]), &fm(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn hull_variation_examples() {
        let r = hull_variation(&[fm(&[1.0, 0.0, 0.0])], &[fm(&[0.0, 1.0, 0.0]), fm(&[0.0, 0.0, 1.0])]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);

        let r = hull_variation(&[fm(&[0.5, 0.5])], &[fm(&[1.0, 0.0]), fm(&[0.0, 1.0])]).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!((r.mixture_q[0] - 0.5).abs() < 1e-9);

        let a = [fm(&[0.7, 0.2, 0.1])];
        let b = [fm(&[0.2, 0.7, 0.1]), fm(&[0.2, 0.1, 0.7])];
        let r = hull_variation(&a, &b).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9);
        // one-dimensional sweep oracle over the B-mixture weight
        let sweep = (0..=10_000)
            .map(|s| {
                let l = s as f64 / 10_000.0;
                let q = FiniteMeasure::mixture(&b, &[l, 1.0 - l]).unwrap();
                total_variation(&a[0], &q).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((sweep - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hull_variation_survives_long_degenerate_runs() {
        // Nearly collinear, highly degenerate instance that needs thousands
        // of pivots.
        let a = [crate::measures::discretize(&DensitySpec::Uniform, 128).unwrap()];
        let b: Vec<FiniteMeasure> = (1..=16)
            .map(|order| crate::measures::discretize(&DensitySpec::CesaroMixture { order }, 128).unwrap())
            .collect();
        let r = hull_variation(&a, &b).unwrap();
        let last = total_variation(&a[0], &b[15]).unwrap();
        assert!(r.value <= last + 1e-9);
        assert!(r.value > 0.0);
    }

    #[test]
    fn hull_variation_rejects_bad_sets() {
        assert!(hull_variation(&[], &[fm(&[1.0])]).is_err());
        assert!(hull_variation(&[fm(&[1.0, 0.0])], &[fm(&[1.0])]).is_err());
    }

    #[test]
    fn kraft_bound_examples() {
        let b = kraft_bound(&[fm(&[0.7, 0.3])], &[fm(&[0.3, 0.7])]).unwrap();
        assert!((b - 0.6).abs() < 1e-9);
        // all four deterministic tests on one observation
        let p = fm(&[0.7, 0.3]);
        let q = fm(&[0.3, 0.7]);
        let best = (0..4u32)
            .map(|mask| {
                let t = Test::new((0..2).map(|j| ((mask >> j) & 1) as f64).collect()).unwrap();
                t.alpha(&p) + t.beta(&q)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((best - 0.6).abs() < 1e-12);

        let s = fm(&[0.3, 0.3, 0.4]);
        assert!((kraft_bound(&[s.clone(), fm(&[1.0, 0.0, 0.0])], &[s]).unwrap() - 1.0).abs() < 1e-9);
        assert!(kraft_bound(&[fm(&[1.0, 0.0])], &[fm(&[0.0, 1.0])]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn optimal_test_examples() {
        let p = fm(&[0.7, 0.3]);
        let q = fm(&[0.3, 0.7]);
        let (t, _) = optimal_test(std::slice::from_ref(&p), std::slice::from_ref(&q)).unwrap();
        assert_eq!(t.reject_prob, vec![0.0, 1.0]);
        assert!((t.alpha(&p) - 0.3).abs() < 1e-12);
        assert!((t.beta(&q) - 0.3).abs() < 1e-12);

        let s = fm(&[0.25, 0.75]);
        let (t, _) = optimal_test(std::slice::from_ref(&s), std::slice::from_ref(&s)).unwrap();
        assert!((t.alpha(&s) + t.beta(&s) - 1.0).abs() < 1e-12);

        let (t, _) = optimal_test(&[fm(&[1.0, 0.0])], &[fm(&[0.0, 1.0])]).unwrap();
        assert_eq!(t.reject_prob, vec![0.0, 1.0]);
    }

    #[test]
    fn test_rejects_out_of_range_probabilities() {
        assert!(Test::new(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn ks_distance_examples() {
        let u = DensitySpec::Uniform;
        let d = ks_distance(&DensitySpec::PuFamily { u: 0.4 }, &u).unwrap();
        assert!((d - 0.2).abs() < 1e-9);
        let s = DensitySpec::OnePlusSine { frequency: 3 };
        assert_eq!(ks_distance(&s, &s).unwrap(), 0.0);
        let d = ks_distance(&DensitySpec::OnePlusSine { frequency: 1 }, &u).unwrap();
        // F(x) - x = (1 - cos 2πx)/(2π) peaks at x = 1/2
        assert!((d - 1.0 / PI).abs() < 1e-9);
    }

    #[test]
    fn ks_distance_matches_dense_scan() {
        let pairs = [
            (DensitySpec::OnePlusSine { frequency: 2 }, DensitySpec::CesaroMixture { order: 3 }),
            (DensitySpec::PuFamily { u: 0.7 }, DensitySpec::OnePlusSine { frequency: 1 }),
        ];
        for (a, b) in pairs {
            let scan = (0..=200_000)
                .map(|j| {
                    let x = j as f64 / 200_000.0;
                    (a.cdf(x) - b.cdf(x)).abs()
                })
                .fold(0.0, f64::max);
            let d = ks_distance(&a, &b).unwrap();
            assert!(d >= scan - 1e-12 && d - scan < 1e-6, "{a:?} {b:?}: {d} vs {scan}");
        }
    }

    #[test]
    fn density_tv_matches_quadrature() {
        let u = DensitySpec::Uniform;
        let f1 = DensitySpec::OnePlusSine { frequency: 1 };
        assert!((density_total_variation(&u, &f1).unwrap() - 1.0 / PI).abs() < 1e-12);
        for m in [2u32, 5, 16] {
            let c = DensitySpec::CesaroMixture { order: m };
            let quad = 0.5
                * c.feature_points()
                    .windows(2)
                    .map(|w| adaptive_simpson(&|x| (c.density(x) - 1.0).abs(), w[0], w[1], 1e-11))
                    .sum::<f64>();
            assert!((density_total_variation(&u, &c).unwrap() - quad).abs() < 1e-8, "m={m}");
        }
    }

    fn measure(k: usize) -> impl Strategy<Value = FiniteMeasure> {
        prop::collection::vec(0.0f64..1.0, k)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3)
            .prop_map(|w| normalize(&w).unwrap())
    }

    fn sets(k: usize) -> impl Strategy<Value = (Vec<FiniteMeasure>, Vec<FiniteMeasure>)> {
        (prop::collection::vec(measure(k), 1..=3), prop::collection::vec(measure(k), 1..=3))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hull_below_pairwise_minimum((a, b) in (2usize..=4).prop_flat_map(sets)) {
            let r = hull_variation(&a, &b).unwrap();
            let pairwise = a.iter()
                .flat_map(|p| b.iter().map(move |q| total_variation(p, q).unwrap()))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(r.value <= pairwise + 1e-9);
            if a.len() == 1 && b.len() == 1 {
                prop_assert!((r.value - pairwise).abs() < 1e-9);
            }
            let s: f64 = r.mixture_p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9 && r.mixture_p.iter().all(|w| *w >= 0.0));
        }

        #[test]
        fn hull_symmetric_and_monotone((a, b) in (2usize..=4).prop_flat_map(sets), extra in (2usize..=4).prop_flat_map(measure)) {
            prop_assume!(extra.alphabet_size() == a[0].alphabet_size());
            let ab = hull_variation(&a, &b).unwrap().value;
            let ba = hull_variation(&b, &a).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-9);
            let mut a2 = a.clone();
            a2.push(extra.clone());
            prop_assert!(hull_variation(&a2, &b).unwrap().value <= ab + 1e-9);
            let mut b2 = b.clone();
            b2.push(extra);
            prop_assert!(hull_variation(&a, &b2).unwrap().value <= ab + 1e-9);
        }

        #[test]
        fn optimal_test_attains_bound((a, b) in (2usize..=4).prop_flat_map(sets)) {
            let (t, hull) = optimal_test(&a, &b).unwrap();
            let p = FiniteMeasure::mixture(&a, &hull.mixture_p).unwrap();
            let q = FiniteMeasure::mixture(&b, &hull.mixture_q).unwrap();
            prop_assert!((t.alpha(&p) + t.beta(&q) - (1.0 - hull.value)).abs() < 1e-9);
        }
    }
}
