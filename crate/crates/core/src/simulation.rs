//! Seeded samplers and Monte Carlo estimation.
//!
//! Every replication `r` draws from its own ChaCha8 stream derived from
//! `(seed, stream, r)`, so results do not depend on how rayon splits work
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::measures::{DensitySpec, FiniteMeasure, Law, Partition};
use crate::partition_tests::{CountTest, Role};
use crate::scheduler::{TestFamily, TestSchedule};

/// Largest expected atom count a Poisson draw may have.
pub const MAX_POISSON_MEAN: f64 = 1e9;

pub const MIN_REPLICATIONS: u64 = 100;

const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Generator for replication `r`; distinct replications get distinct streams.
    pub fn replication(&self, r: u64) -> ChaCha8Rng {
        RngSpec {
            seed: self.seed,
            stream: self.stream.wrapping_mul(STREAM_MIX).wrapping_add(r),
        }
        .rng()
    }

    /// A different experiment under the same seed.
    pub fn child(&self, label: u64) -> RngSpec {
        RngSpec {
            seed: self.seed,
            stream: (self.stream ^ label.wrapping_mul(STREAM_MIX)).rotate_left(17),
        }
    }
}

/// Inverse-CDF draw of an atom index. Atoms of zero weight are never drawn.
pub fn draw_atom<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let idx = cumulative.partition_point(|c| *c <= u);
    if idx < cumulative.len() {
        return idx;
    }
    // The total fell short of `u` by rounding: take the last atom with mass.
    (0..cumulative.len())
        .rev()
        .find(|&i| cumulative[i] > if i == 0 { 0.0 } else { cumulative[i - 1] })
        .unwrap_or(0)
}

/// Inverse-CDF draw from one of the named densities.
pub fn draw_point<R: Rng + ?Sized>(spec: &DensitySpec, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    spec.quantile(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    Atoms(Vec<usize>),
    Points(Vec<f64>),
}

impl Sample {
    pub fn len(&self) -> usize {
        match self {
            Sample::Atoms(a) => a.len(),
            Sample::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` i.i.d. draws from `law`.
pub fn sample_iid<R: Rng + ?Sized>(law: &Law, n: u64, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return validation("sample size must be at least 1");
    }
    law.validate()?;
    Ok(match law {
        Law::Finite(m) => {
            let cum = m.cumulative();
            Sample::Atoms((0..n).map(|_| draw_atom(&cum, rng)).collect())
        }
        Law::Density(d) => Sample::Points((0..n).map(|_| draw_point(d, rng)).collect()),
    })
}

/// Draws single observations of `law` and reports the partition cell they fall in.
#[derive(Debug, Clone)]
pub struct CellSampler {
    law: Law,
    partition: Partition,
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(law: Law, partition: Partition) -> Result<Self> {
        law.validate()?;
        partition.check_compatible(&law)?;
        let cumulative = match &law {
            Law::Finite(m) => m.cumulative(),
            Law::Density(_) => Vec::new(),
        };
        Ok(Self {
            law,
            partition,
            cumulative,
        })
    }

    pub fn cells(&self) -> usize {
        self.partition.len()
    }

    pub fn draw_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.law {
            Law::Finite(_) => {
                let atom = draw_atom(&self.cumulative, rng);
                self.partition.cell_of_atom(atom).expect("compatible partition")
            }
            Law::Density(d) => {
                let x = draw_point(d, rng);
                // Quantiles land in [0,1]; the partition covers (0,1).
                let x = x.clamp(f64::MIN_POSITIVE, 1.0);
                self.partition.cell_of_point(x).expect("partition covers (0,1)")
            }
        }
    }

    pub fn counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<u64> {
        let mut counts = vec![0u64; self.cells()];
        for _ in 0..n {
            counts[self.draw_cell(rng)] += 1;
        }
        counts
    }
}

/// Poisson process with mean measure `mass · shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub mass: f64,
    pub shape: FiniteMeasure,
}

impl PoissonModel {
    pub fn new(mass: f64, shape: FiniteMeasure) -> Result<Self> {
        let m = Self { mass, shape };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return validation(format!("Poisson mass must be positive and finite, got {}", self.mass));
        }
        Ok(())
    }

    /// Mean measure vector `λ·Q`.
    pub fn mean_measure(&self) -> Vec<f64> {
        self.shape.weights().iter().map(|w| w * self.mass).collect()
    }
}

/// Superposition of `n` independent copies: `N ~ Poisson(nλ)` atoms drawn
/// i.i.d. from the shape.
pub fn sample_poisson_process<R: Rng + ?Sized>(model: &PoissonModel, n: u64, rng: &mut R) -> Result<Vec<usize>> {
    let count = sample_poisson_count(model, n, rng)?;
    let cum = model.shape.cumulative();
    Ok((0..count).map(|_| draw_atom(&cum, rng)).collect())
}

pub fn sample_poisson_count<R: Rng + ?Sized>(model: &PoissonModel, n: u64, rng: &mut R) -> Result<u64> {
    model.validate()?;
    if n == 0 {
        return validation("number of copies must be at least 1");
    }
    let mean = model.mass * n as f64;
    if mean > MAX_POISSON_MEAN {
        return Err(Error::Resource(format!(
            "expected atom count {mean:e} exceeds {MAX_POISSON_MEAN:e}"
        )));
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Numeric {
        message: format!("Poisson({mean}): {e}"),
        iterations: 0,
    })?;
    let draw: f64 = dist.sample(rng);
    Ok(draw as u64)
}

/// Bound on `P(|N − nλ| > n x)` for `N ~ Poisson(nλ)`, `0 < x < λ`.
pub fn poisson_atom_tail_bound(lambda: f64, n: u64, x: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return validation(format!("λ must be positive, got {lambda}"));
    }
    if !(x > 0.0) {
        return validation(format!("deviation x must be positive, got {x}"));
    }
    if x >= lambda {
        return validation(format!("deviation x = {x} must be below λ = {lambda}"));
    }
    let n = n as f64;
    let upper = -n * (lambda + x) * (x / lambda).ln_1p() + n * x;
    let lower = -n * (lambda - x) * (-x / lambda).ln_1p() - n * x;
    Ok(upper.exp() + lower.exp())
}

/// Observations `y_j = s_j + ε ξ_j`, `j = 1..d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSequenceModel {
    pub signal: Vec<f64>,
    pub epsilon: f64,
}

impl GaussianSequenceModel {
    pub fn new(signal: Vec<f64>, epsilon: f64) -> Result<Self> {
        let m = Self { signal, epsilon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal.is_empty() {
            return validation("signal dimension must be at least 1");
        }
        if self.signal.iter().any(|s| !s.is_finite()) {
            return validation("signal coordinates must be finite");
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return validation(format!("noise level must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.signal.len()
    }
}

pub fn sample_gaussian_sequence<R: Rng + ?Sized>(model: &GaussianSequenceModel, rng: &mut R) -> Vec<f64> {
    model
        .signal
        .iter()
        .map(|s| {
            let xi: f64 = StandardNormal.sample(rng);
            s + model.epsilon * xi
        })
        .collect()
}

/// Monte Carlo estimate of an event probability with a 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub estimate: f64,
    pub events: u64,
    pub replications: u64,
    /// `1.96 · sqrt(est(1 − est)/R)`.
    pub half_width_95: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// `"normal"` or `"wilson"`.
    pub ci_method: String,
    pub model_label: String,
    pub test_label: String,
    pub seed: u64,
}

const Z95: f64 = 1.959_963_984_540_054;

impl SimulationReport {
    pub fn from_counts(events: u64, replications: u64, model_label: &str, test_label: &str, seed: u64) -> Self {
        let r = replications as f64;
        let est = events as f64 / r;
        let half = 1.96 * (est * (1.0 - est) / r).sqrt();
        let (lo, hi, method) = if est < 5.0 / r {
            let (lo, hi) = wilson_interval(events, replications);
            (lo, hi, "wilson")
        } else {
            ((est - half).max(0.0), (est + half).min(1.0), "normal")
        };
        Self {
            estimate: est,
            events,
            replications,
            half_width_95: half,
            ci_lower: lo,
            ci_upper: hi,
            ci_method: method.into(),
            model_label: model_label.into(),
            test_label: test_label.into(),
            seed,
        }
    }

    /// Binomial standard error at probability `p` for this replication count.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }

    pub fn standard_error(&self) -> f64 {
        self.standard_error_at(self.estimate)
    }
}

pub fn wilson_interval(events: u64, replications: u64) -> (f64, f64) {
    let n = replications as f64;
    let p = events as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let spread = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if events == 0 { 0.0 } else { (centre - spread).max(0.0) };
    let hi = if events == replications { 1.0 } else { (centre + spread).min(1.0) };
    (lo, hi)
}

fn check_replications(replications: u64) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        return validation(format!(
            "replications must be at least {MIN_REPLICATIONS}, got {replications}"
        ));
    }
    Ok(())
}

/// Counts replications on which `event` returns true. Replication `r` gets
/// the generator `rng.replication(r)`; the count is the same for any thread
/// count.
pub fn count_events<F>(replications: u64, rng: RngSpec, event: F) -> Result<u64>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync,
{
    (0..replications)
        .into_par_iter()
        .map(|r| event(&mut rng.replication(r)).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Monte Carlo probability of `event`, with report labels.
pub fn estimate_probability<F>(
    replications: u64,
    rng: RngSpec,
    model_label: &str,
    test_label: &str,
    event: F,
) -> Result<SimulationReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync,
{
    check_replications(replications)?;
    let events = count_events(replications, rng, event)?;
    Ok(SimulationReport::from_counts(events, replications, model_label, test_label, rng.seed))
}

/// Probability that a count test errs at sample size `n` when data come
/// from `sampler` and the law plays `role`.
pub fn estimate_error<T: CountTest + ?Sized>(
    test: &T,
    sampler: &CellSampler,
    role: Role,
    n: u64,
    replications: u64,
    rng: RngSpec,
    labels: (&str, &str),
) -> Result<SimulationReport> {
    if n == 0 {
        return validation("sample size must be at least 1");
    }
    let wrong = role.error_decision();
    estimate_probability(replications, rng, labels.0, labels.1, |r| {
        Ok(test.decide(&sampler.counts(n, r)) == wrong)
    })
}

/// Fraction of sample paths erring at some `n ∈ (k, N_max]`, for each `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscernibilityCurve {
    pub k_grid: Vec<u64>,
    pub error_after: Vec<f64>,
    pub paths_with_error_after: Vec<u64>,
    pub replications: u64,
    pub n_max: u64,
}

impl DiscernibilityCurve {
    pub fn standard_error(&self, i: usize) -> f64 {
        let p = self.error_after[i];
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }
}

/// Index of the last error along one path, 0 if none.
fn last_error_on_path<T: CountTest>(
    schedule: &TestSchedule,
    family: &TestFamily<T>,
    sampler: &CellSampler,
    role: Role,
    rng: &mut ChaCha8Rng,
) -> u64 {
    let wrong = role.error_decision();
    let mut counts = vec![0u64; sampler.cells()];
    let mut last = 0;
    for n in 1..=schedule.n_max {
        counts[sampler.draw_cell(rng)] += 1;
        let fam = schedule.family_at(n).expect("schedule covers 1..=n_max");
        if family.member(fam).test.decide(&counts) == wrong {
            last = n;
        }
    }
    last
}

/// Grows each path one observation at a time and applies the scheduled test
/// to every prefix.
pub fn discernibility_paths<T: CountTest>(
    schedule: &TestSchedule,
    family: &TestFamily<T>,
    sampler: &CellSampler,
    role: Role,
    k_grid: &[u64],
    replications: u64,
    rng: RngSpec,
) -> Result<DiscernibilityCurve> {
    check_replications(replications)?;
    if family.len() < schedule.families_covered {
        return validation("schedule uses more families than were supplied");
    }
    let mut ks = k_grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.last().is_some_and(|k| *k > schedule.n_max) {
        return validation(format!("k grid exceeds N_max = {}", schedule.n_max));
    }
    let lasts: Vec<u64> = (0..replications)
        .into_par_iter()
        .map(|r| last_error_on_path(schedule, family, sampler, role, &mut rng.replication(r)))
        .collect();
    let paths: Vec<u64> = ks
        .iter()
        .map(|k| lasts.iter().filter(|l| **l > *k).count() as u64)
        .collect();
    Ok(DiscernibilityCurve {
        error_after: paths.iter().map(|p| *p as f64 / replications as f64).collect(),
        paths_with_error_after: paths,
        k_grid: ks,
        replications,
        n_max: schedule.n_max,
    })
}
