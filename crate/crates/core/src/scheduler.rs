//! Interleaving of exponentially consistent tests into a single sequence that
//! errs only finitely often.
//!
//! Family `i` comes with an exponent `c_i` and an onset `n0_i` such that both
//! error probabilities at sample size `n > n0_i` are at most `exp(−c_i n)`.
//! The block length `l_i` is the least integer with
//! `exp(−c_i l_i) / (1 − exp(−c_i)) <= i^{-2}`; running family `i` only past
//! `l_i` makes its contribution to the error sum at most `i^{-2}`, and the sum
//! over all blocks is finite.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::partition_tests::{CountTest, Decision, ErrorCertificate, FrequencyTest};

/// `1 / (1 − e^{−c})`, the constant turning `e^{−cn}` per-n bounds into a
/// bound on the tail sum `Σ_{n>k} e^{−cn} <= C e^{−ck}`.
pub fn geometric_constant(c: f64) -> f64 {
    1.0 / (-(-c).exp_m1())
}

/// `C · exp(−c k)`: bound on the probability of any error after index `k`.
/// Not clamped; use [`clamp_probability`] for reporting.
pub fn tail_bound(k: u64, c: f64, big_c: f64) -> f64 {
    big_c * (-c * k as f64).exp()
}

pub fn clamp_probability(p: f64) -> f64 {
    p.min(1.0)
}

fn block_condition(c: f64, l: u64, i: u64) -> bool {
    (-c * l as f64).exp() * geometric_constant(c) <= 1.0 / (i * i) as f64
}

/// Least `l >= 1` with `exp(−c l)(1 − exp(−c))^{-1} <= i^{-2}`.
pub fn block_length(c: f64, i: u64) -> Result<u64> {
    if !(c > 0.0) || !c.is_finite() {
        return validation(format!("exponent must be positive and finite, got {c}"));
    }
    if i == 0 {
        return validation("family indices start at 1");
    }
    let guess = ((2.0 * (i as f64).ln() - (-(-c).exp_m1()).ln()) / c).ceil();
    let mut l = if guess.is_finite() && guess > 1.0 { guess as u64 } else { 1 };
    // Correct for rounding in the closed form.
    while l > 1 && block_condition(c, l - 1, i) {
        l -= 1;
    }
    while !block_condition(c, l, i) {
        l += 1;
    }
    Ok(l)
}

/// `l_1 = 1` and `l_i = block_length(c_i, i)` for `i >= 2`.
pub fn block_lengths(exponents: &[f64]) -> Result<Vec<u64>> {
    exponents
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            if !(c > 0.0) {
                return validation(format!("exponent {} must be positive, got {c}", idx + 1));
            }
            if idx == 0 {
                Ok(1)
            } else {
                block_length(c, idx as u64 + 1)
            }
        })
        .collect()
}

/// One test sequence of a family, with its certified exponent and onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember<T> {
    pub test: T,
    pub exponent: f64,
    pub onset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily<T> {
    members: Vec<FamilyMember<T>>,
}

impl<T> TestFamily<T> {
    pub fn new(members: Vec<FamilyMember<T>>) -> Result<Self> {
        if members.is_empty() {
            return validation("a test family needs at least one member");
        }
        for (i, m) in members.iter().enumerate() {
            if !(m.exponent > 0.0) {
                return validation(format!("family {} has non-positive exponent", i + 1));
            }
            if m.onset == 0 {
                return validation(format!("family {} has onset 0; onsets start at 1", i + 1));
            }
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// 1-based access, matching the indexing of the schedule.
    pub fn member(&self, index: usize) -> &FamilyMember<T> {
        &self.members[index - 1]
    }

    pub fn members(&self) -> &[FamilyMember<T>] {
        &self.members
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.exponent).collect()
    }
}

/// A maximal run of sample sizes handled by one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub start: u64,
    /// Inclusive; `None` when the block runs past the horizon forever.
    pub end: Option<u64>,
    /// 1-based family index.
    pub family: usize,
    pub exponent: f64,
    pub onset: u64,
    /// Clamped per-n error bound at `start`.
    pub certified_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSchedule {
    pub n_max: u64,
    pub block_lengths: Vec<u64>,
    pub blocks: Vec<Block>,
    /// Number of families reached within `n_max`.
    pub families_covered: usize,
    pub families_total: usize,
}

/// Builds the interleaved schedule for `n = 1..=n_max`.
///
/// Families are taken in order. Boundary `s` is the smallest admissible value
/// `max(b_{s-1} + 1, l_{s+1}, n0_{s+1} + 1)`, with `b_0 = l_1 = 1`; block `s`
/// covers `(b_s, b_{s+1}]` and the last family runs on indefinitely.
pub fn interleave<T>(family: &TestFamily<T>, n_max: u64) -> Result<TestSchedule> {
    if n_max == 0 {
        return validation("n_max must be at least 1");
    }
    let exps = family.exponents();
    let lengths = block_lengths(&exps)?;
    let total = family.len();
    let mut boundaries = vec![lengths[0]];
    for s in 1..total {
        let m = family.member(s + 1);
        let b = (boundaries[s - 1] + 1).max(lengths[s]).max(m.onset + 1);
        boundaries.push(b);
    }
    if total > 1 && n_max < boundaries[1] {
        return validation(format!(
            "n_max = {n_max} is below the first block boundary {}",
            boundaries[1]
        ));
    }
    let mut blocks = Vec::new();
    for s in 0..total {
        let start = if s == 0 { 1 } else { boundaries[s] + 1 };
        if start > n_max {
            break;
        }
        let end = (s + 1 < total).then(|| boundaries[s + 1]);
        let m = family.member(s + 1);
        blocks.push(Block {
            start,
            end,
            family: s + 1,
            exponent: m.exponent,
            onset: m.onset,
            certified_bound: per_n_bound(m.exponent, m.onset, start),
        });
    }
    let covered = blocks.len();
    Ok(TestSchedule {
        n_max,
        block_lengths: lengths,
        blocks,
        families_covered: covered,
        families_total: total,
    })
}

fn per_n_bound(c: f64, onset: u64, n: u64) -> f64 {
    if n > onset {
        clamp_probability((-c * n as f64).exp())
    } else {
        1.0
    }
}

impl TestSchedule {
    pub fn block_at(&self, n: u64) -> Option<&Block> {
        if n == 0 || n > self.n_max {
            return None;
        }
        let idx = self.blocks.partition_point(|b| b.start <= n);
        self.blocks.get(idx.checked_sub(1)?)
    }

    /// 1-based family index used at sample size `n`.
    pub fn family_at(&self, n: u64) -> Option<usize> {
        self.block_at(n).map(|b| b.family)
    }

    /// Boundaries `b_1 < b_2 < …` between consecutive blocks.
    pub fn boundaries(&self) -> Vec<u64> {
        self.blocks.iter().skip(1).map(|b| b.start - 1).collect()
    }

    /// Clamped per-n error bound at `n` for a law that is covered by every
    /// family with index `>= first_family` (use 1 for hypothesis members).
    pub fn error_bound(&self, n: u64, first_family: usize) -> f64 {
        match self.block_at(n) {
            Some(b) if b.family >= first_family => per_n_bound(b.exponent, b.onset, n),
            _ => 1.0,
        }
    }

    /// Clamped certified bound on the probability of an error at some
    /// `n > k`, where sizes past the horizon use the last family forever.
    pub fn tail_after(&self, k: u64, first_family: usize) -> f64 {
        let mut sum = 0.0;
        for n in (k + 1)..=self.n_max {
            sum += self.error_bound(n, first_family);
            if sum >= 1.0 {
                return 1.0;
            }
        }
        let last = self.blocks.last().expect("schedule has a block");
        if last.end.is_none() && last.family >= first_family {
            let from = k.max(self.n_max).max(last.onset);
            // Σ_{n > from} e^{−cn} = e^{−c(from+1)} / (1 − e^{−c})
            let beyond = tail_bound(from + 1, last.exponent, geometric_constant(last.exponent));
            sum += beyond + (self.n_max.max(k)..from).map(|_| 1.0).sum::<f64>();
        } else if self.families_covered < self.families_total || last.family < first_family {
            // later blocks are not materialized within the horizon
            return 1.0;
        }
        clamp_probability(sum)
    }

    /// `Σ_{s>=t} i_s^{-2}` over the blocks of the schedule, with `i_s = s + 1`.
    pub fn chain_bound(&self, t: usize) -> f64 {
        (t..self.families_total).map(|s| 1.0 / ((s + 1) * (s + 1)) as f64).sum()
    }

    /// Smallest `k` in `0..=n_max` with `tail_after(k) < level`.
    pub fn first_k_below(&self, level: f64, first_family: usize) -> Option<u64> {
        (0..=self.n_max).find(|&k| self.tail_after(k, first_family) < level)
    }
}

/// Rejects iff any constituent frequency test rejects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionTest {
    pub parts: Vec<FrequencyTest>,
}

impl CountTest for UnionTest {
    fn decide(&self, counts: &[u64]) -> Decision {
        if self.parts.iter().any(|t| t.decide(counts) == Decision::Reject) {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

/// A test sequence for `Θ0` against one alternative set, with bounds valid
/// at every sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSequence {
    /// Induced vectors of the hypothesis set.
    pub hypothesis: Vec<Vec<f64>>,
    pub test: UnionTest,
    pub certificate: ErrorCertificate,
}

impl CertifiedSequence {
    pub fn from_frequency_test(test: FrequencyTest) -> Self {
        Self {
            hypothesis: test.v0.clone(),
            certificate: test.certificate(),
            test: UnionTest { parts: vec![test] },
        }
    }

    pub fn bound(&self, n: u64) -> ErrorBound {
        ErrorBound {
            alpha: self.certificate.alpha(n),
            beta: self.certificate.beta(n),
        }
    }
}

impl CountTest for CertifiedSequence {
    fn decide(&self, counts: &[u64]) -> Decision {
        self.test.decide(counts)
    }
}

/// Type I and type II error bounds at a single sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub alpha: f64,
    pub beta: f64,
}

impl ErrorBound {
    /// Bounds for "reject iff either rejects": type I errors add, the type II
    /// error against a member of either alternative is at most the larger.
    pub fn union(self, other: ErrorBound) -> ErrorBound {
        ErrorBound {
            alpha: clamp_probability(self.alpha + other.alpha),
            beta: self.beta.max(other.beta),
        }
    }
}

fn same_vector_set(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let contains = |set: &[Vec<f64>], v: &Vec<f64>| {
        set.iter()
            .any(|w| w.len() == v.len() && w.iter().zip(v).all(|(x, y)| (x - y).abs() <= 1e-12))
    };
    a.iter().all(|v| contains(b, v)) && b.iter().all(|v| contains(a, v))
}

/// Test sequence for `Θ0` against `Θ11 ∪ Θ12` built from sequences for each.
pub fn union_schedule(a: &CertifiedSequence, b: &CertifiedSequence) -> Result<CertifiedSequence> {
    if !same_vector_set(&a.hypothesis, &b.hypothesis) {
        return validation("union of test sequences requires a shared hypothesis set");
    }
    Ok(CertifiedSequence {
        hypothesis: a.hypothesis.clone(),
        test: UnionTest {
            parts: a.test.parts.iter().chain(&b.test.parts).cloned().collect(),
        },
        certificate: a.certificate.union(&b.certificate),
    })
}

/// Nested family `Θ_{1i} = ∪_{j<=i} piece_j`.
///
/// Each piece carries an optional exponent; without one, half the slowest
/// certified decay rate is used. The family member for `i` uses the smallest
/// exponent among pieces `1..=i` and the onset certified for it.
pub fn nested_family(pieces: &[(CertifiedSequence, Option<f64>)]) -> Result<TestFamily<CertifiedSequence>> {
    let Some((first, _)) = pieces.first() else {
        return validation("need at least one alternative piece");
    };
    let mut members = Vec::with_capacity(pieces.len());
    let mut acc = first.clone();
    let mut exponent = f64::INFINITY;
    for (i, (piece, c)) in pieces.iter().enumerate() {
        if i > 0 {
            acc = union_schedule(&acc, piece)?;
        }
        let c = match c {
            Some(c) => *c,
            None => piece.certificate.default_exponent(),
        };
        exponent = exponent.min(c);
        let onset = acc.certificate.onset(exponent).map_err(|e| match e {
            Error::Construction(m) => Error::Construction(format!("piece {}: {m}", i + 1)),
            other => other,
        })?;
        members.push(FamilyMember {
            test: acc.clone(),
            exponent,
            onset,
        });
    }
    TestFamily::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition_tests::{build_frequency_test, separation_of_vectors};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn member(c: f64, onset: u64) -> FamilyMember<()> {
        FamilyMember {
            test: (),
            exponent: c,
            onset,
        }
    }

    fn seq(v0: &[f64], v1: &[f64]) -> CertifiedSequence {
        let r = separation_of_vectors(vec![v0.to_vec()], vec![v1.to_vec()]).unwrap();
        CertifiedSequence::from_frequency_test(build_frequency_test(&r, 1).unwrap())
    }

    #[test]
    fn block_length_examples() {
        assert_eq!(block_lengths(&[0.3]).unwrap(), vec![1]);
        assert_eq!(block_length(1.0, 2).unwrap(), 2);
        assert_eq!(block_length(0.5, 3).unwrap(), 7);
        assert_eq!(block_lengths(&[2.0, 1.0, 0.5]).unwrap(), vec![1, 2, 7]);
    }

    #[test]
    fn block_lengths_reject_bad_exponents() {
        assert!(block_lengths(&[1.0, 0.0]).is_err());
        assert!(block_lengths(&[-1.0]).is_err());
        assert!(block_lengths(&[f64::NAN]).is_err());
    }

    #[test]
    fn single_family_schedule() {
        let f = TestFamily::new(vec![member(1.0, 1)]).unwrap();
        let s = interleave(&f, 50).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert!((1..=50).all(|n| s.family_at(n) == Some(1)));
    }

    #[test]
    fn two_family_schedule() {
        let f = TestFamily::new(vec![member(1.0, 1), member(1.0, 1)]).unwrap();
        let s = interleave(&f, 10).unwrap();
        assert_eq!(s.boundaries(), vec![2]);
        assert_eq!(s.family_at(1), Some(1));
        assert_eq!(s.family_at(2), Some(1));
        assert_eq!(s.family_at(3), Some(2));
        assert_eq!(s.family_at(10), Some(2));
        assert_eq!(s.family_at(11), None);
    }

    #[test]
    fn onsets_push_boundaries() {
        let f = TestFamily::new(vec![member(1.0, 1), member(1.0, 40), member(1.0, 3)]).unwrap();
        let s = interleave(&f, 100).unwrap();
        assert_eq!(s.boundaries(), vec![41, 42]);
        for b in &s.blocks[1..] {
            assert!(b.start - 1 > b.onset);
        }
    }

    #[test]
    fn horizon_below_first_boundary_is_rejected() {
        let f = TestFamily::new(vec![member(1.0, 1), member(0.1, 1)]).unwrap();
        let l2 = block_length(0.1, 2).unwrap();
        assert!(interleave(&f, l2 - 1).is_err());
        assert!(interleave(&f, l2).is_ok());
    }

    #[test]
    fn family_validation() {
        assert!(TestFamily::<()>::new(vec![]).is_err());
        assert!(TestFamily::new(vec![member(0.0, 1)]).is_err());
        assert!(TestFamily::new(vec![member(1.0, 0)]).is_err());
    }

    #[test]
    fn unit_exponent_tail_chain() {
        let f = TestFamily::new((0..12).map(|_| member(1.0, 1)).collect()).unwrap();
        let s = interleave(&f, 200).unwrap();
        let b = s.boundaries();
        for t in 1..s.families_total {
            let tail = s.tail_after(b[t - 1], 1);
            assert!(tail <= s.chain_bound(t) + 1e-15, "t={t}");
        }
        assert!(s.chain_bound(1) < PI * PI / 6.0);
    }

    #[test]
    fn tail_bound_examples() {
        let c1 = geometric_constant(1.0);
        assert!((c1 - 1.581_976_706_869_326_4).abs() < 1e-12);
        assert!((tail_bound(0, 1.0, c1) - c1).abs() < 1e-15);
        assert_eq!(clamp_probability(tail_bound(0, 1.0, c1)), 1.0);
        assert!((tail_bound(10, 1.0, c1) - 7.18e-5).abs() < 1e-7);
        assert!(tail_bound(10_000, 1.0, c1) == 0.0);
    }

    #[test]
    fn geometric_tail_dominates_series() {
        for c in [0.05, 0.3, 1.0, 2.5] {
            for k in [0u64, 3, 40] {
                let series: f64 = (k..k + 10_000).map(|n| (-c * n as f64).exp()).sum();
                assert!(series <= tail_bound(k, c, geometric_constant(c)) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn tail_after_is_non_increasing() {
        let f = TestFamily::new(vec![member(0.2, 5), member(0.1, 30), member(0.3, 2)]).unwrap();
        let s = interleave(&f, 400).unwrap();
        let tails: Vec<f64> = (0..=400).map(|k| s.tail_after(k, 1)).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(tails[400] > 0.0);
        let k = s.first_k_below(0.01, 1).unwrap();
        assert!(s.tail_after(k, 1) < 0.01 && s.tail_after(k - 1, 1) >= 0.01);
    }

    #[test]
    fn uncovered_alternatives_have_trivial_bounds() {
        let f = TestFamily::new(vec![member(1.0, 1), member(1.0, 1)]).unwrap();
        let s = interleave(&f, 10).unwrap();
        assert_eq!(s.error_bound(1, 2), 1.0);
        assert!(s.error_bound(5, 2) < 1.0);
    }

    #[test]
    fn union_bound_arithmetic() {
        let u = ErrorBound { alpha: 0.1, beta: 0.3 }.union(ErrorBound { alpha: 0.2, beta: 0.4 });
        assert!((u.alpha - 0.3).abs() < 1e-15);
        assert!((u.beta - 0.4).abs() < 1e-15);
    }

    #[test]
    fn union_schedule_examples() {
        let a = seq(&[0.5, 0.5], &[0.9, 0.1]);
        let same = union_schedule(&a, &a).unwrap();
        for n in [10u64, 50, 200] {
            let (one, two) = (a.bound(n), same.bound(n));
            assert!((two.alpha - (2.0 * one.alpha).min(1.0)).abs() < 1e-15);
            assert_eq!(two.beta, one.beta);
        }
        let perfect1 = seq(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        let perfect2 = seq(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        let u = union_schedule(&perfect1, &perfect2).unwrap();
        for counts in [[5u64, 0, 0], [0, 5, 0], [0, 0, 5]] {
            let expected = if counts[0] == 5 { Decision::Accept } else { Decision::Reject };
            assert_eq!(u.decide(&counts), expected);
        }
        let other = seq(&[0.4, 0.6], &[0.9, 0.1]);
        assert!(union_schedule(&a, &other).is_err());
    }

    #[test]
    fn nested_family_uses_smallest_exponent() {
        let p = [0.5, 0.5];
        let pieces = vec![
            (seq(&p, &[1.0, 0.0]), Some(0.06)),
            (seq(&p, &[0.0, 1.0]), Some(0.1)),
            (seq(&p, &[0.95, 0.05]), Some(0.05)),
        ];
        let fam = nested_family(&pieces).unwrap();
        assert_eq!(fam.exponents(), vec![0.06, 0.06, 0.05]);
        assert_eq!(fam.member(3).test.test.parts.len(), 3);
        // an exponent above the certified rate is refused
        let bad = vec![(seq(&p, &[0.6, 0.4]), Some(0.5))];
        assert!(matches!(nested_family(&bad), Err(Error::Construction(_))));
    }

    proptest! {
        #[test]
        fn block_length_minimal_and_monotone(c in 0.01f64..5.0, dc in 0.0f64..1.0, i in 2u64..500) {
            let l = block_length(c, i).unwrap();
            prop_assert!(block_condition(c, l, i));
            prop_assert!(l == 1 || !block_condition(c, l - 1, i));
            prop_assert!(block_length(c + dc, i).unwrap() <= l);
        }

        #[test]
        fn schedule_is_well_formed(cs in prop::collection::vec((0.02f64..2.0, 1u64..60), 1..8)) {
            let f = TestFamily::new(cs.iter().map(|&(c, o)| member(c, o)).collect()).unwrap();
            let s = interleave(&f, 5000).unwrap();
            prop_assert!((1..=5000).all(|n| s.family_at(n).is_some()));
            let b = s.boundaries();
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            for blk in &s.blocks[1..] {
                prop_assert!(blk.start - 1 > blk.onset);
                prop_assert!(blk.start > s.block_lengths[blk.family - 1]);
            }
            for t in 1..s.families_covered {
                prop_assert!(s.tail_after(b[t - 1], 1) <= s.chain_bound(t) + 1e-12);
            }
        }
    }
}
