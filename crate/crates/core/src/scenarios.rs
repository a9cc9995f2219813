//! Scenario files and the analyses run on them.
//!
//! A scenario names a hypothesis set, an alternative set, the model class
//! they belong to and the budgets for the numerical work. The builders below
//! produce the standard experiments; [`distinguish`], [`bound`],
//! [`simulate`] and [`schedule`] run the four analyses on any scenario.

use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distances::{density_total_variation, hull_variation, ks_distance, total_variation};
use crate::error::{validation, Error, Result};
use crate::measures::{discretize, normalize, DensitySpec, FiniteMeasure, Law, Partition};
use crate::partition_tests::{
    build_frequency_test, exact_outcome, separation, separation_of_vectors, CountTest, Decision, FrequencyTest, Role,
    SeparationReport,
};
use crate::report::{Field, RunOutput, Table, Verdict};
use crate::scheduler::{interleave, nested_family, CertifiedSequence, TestFamily, TestSchedule};
use crate::simulation::{
    discernibility_paths, estimate_error, estimate_probability, poisson_atom_tail_bound, sample_gaussian_sequence,
    sample_poisson_count, CellSampler, GaussianSequenceModel, PoissonModel, RngSpec, SimulationReport,
};

pub const DEFAULT_GRID_SIZE: usize = 128;
pub const DEFAULT_N_MAX: u64 = 1024;

/// One member of a hypothesis or alternative set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Finite { weights: FiniteMeasure },
    Density(DensitySpec),
    Poisson { mass: f64, shape: FiniteMeasure },
    GaussianSequence { signal: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Finite,
    Density,
    Poisson,
    GaussianSequence,
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Finite { .. } => ModelKind::Finite,
            ModelSpec::Density(_) => ModelKind::Density,
            ModelSpec::Poisson { .. } => ModelKind::Poisson,
            ModelSpec::GaussianSequence { .. } => ModelKind::GaussianSequence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Finite { .. } => Ok(()),
            ModelSpec::Density(d) => d.validate(),
            ModelSpec::Poisson { mass, shape } => PoissonModel::new(*mass, shape.clone()).map(|_| ()),
            ModelSpec::GaussianSequence { signal } => GaussianSequenceModel::new(signal.clone(), 1.0).map(|_| ()),
        }
    }

    pub fn label(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        match self {
            ModelSpec::Finite { weights } => format!("finite({})", list(weights.weights())),
            ModelSpec::Density(DensitySpec::Uniform) => "uniform".into(),
            ModelSpec::Density(DensitySpec::OnePlusSine { frequency }) => format!("one_plus_sine({frequency})"),
            ModelSpec::Density(DensitySpec::CesaroMixture { order }) => format!("cesaro_mixture({order})"),
            ModelSpec::Density(DensitySpec::PuFamily { u }) => format!("pu_family({u})"),
            ModelSpec::Poisson { mass, shape } => format!("poisson({mass}; {})", list(shape.weights())),
            ModelSpec::GaussianSequence { signal } => {
                if signal.len() <= 4 {
                    format!("gaussian_sequence({})", list(signal))
                } else {
                    format!("gaussian_sequence(d={})", signal.len())
                }
            }
        }
    }

    fn law(&self) -> Option<Law> {
        match self {
            ModelSpec::Finite { weights } => Some(Law::Finite(weights.clone())),
            ModelSpec::Density(d) => Some(Law::Density(*d)),
            _ => None,
        }
    }
}

/// Model class shared by every member plus class-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    /// Cells used when a density is replaced by a finite measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    /// Projection levels `m` reported for sequence models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_levels: Option<Vec<usize>>,
}

impl ModelConfig {
    pub fn of(kind: ModelKind) -> Self {
        Self {
            kind,
            grid_size: None,
            projection_levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// One exponent per alternative piece; empty means the certified default.
    #[serde(default)]
    pub exponents: Vec<f64>,
    /// Minimum onsets per piece; the certified onset is used when larger.
    #[serde(default)]
    pub onsets: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replications: u64,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub k_grid: Vec<u64>,
    #[serde(default)]
    pub epsilon_list: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            n_grid: Vec::new(),
            k_grid: Vec::new(),
            epsilon_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub hypothesis: Vec<ModelSpec>,
    pub alternative: Vec<ModelSpec>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub sim: SimConfig,
}

/// Seed and budget overrides for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub seed: u64,
    pub replications: Option<u64>,
}

impl RunSettings {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            replications: None,
        }
    }

    fn replications(&self, s: &Scenario) -> u64 {
        self.replications.unwrap_or(s.sim.replications)
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Validation(format!("scenario JSON: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return validation("scenario name is empty");
        }
        if self.hypothesis.is_empty() || self.alternative.is_empty() {
            return validation("hypothesis and alternative lists must be nonempty");
        }
        for (i, m) in self.members().enumerate() {
            if m.kind() != self.model.kind {
                return validation(format!(
                    "member {} ({}) does not match model type {:?}",
                    i + 1,
                    m.label(),
                    self.model.kind
                ));
            }
            m.validate()?;
        }
        let dims: Vec<usize> = self
            .members()
            .map(|m| match m {
                ModelSpec::Finite { weights } => weights.alphabet_size(),
                ModelSpec::Poisson { shape, .. } => shape.alphabet_size(),
                ModelSpec::GaussianSequence { signal } => signal.len(),
                ModelSpec::Density(_) => 0,
            })
            .collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return validation("all members must share one alphabet size or dimension");
        }
        if let Some(g) = self.model.grid_size {
            if g < 2 {
                return validation("grid_size must be at least 2");
            }
        }
        if matches!(self.model.kind, ModelKind::Finite | ModelKind::Density) {
            let p = self.partition()?;
            for m in self.members() {
                p.check_compatible(&m.law().expect("finite or density"))?;
            }
        }
        if let Some(sch) = &self.schedule {
            if sch.exponents.iter().any(|c| !(*c > 0.0)) {
                return validation("schedule exponents must be positive");
            }
            for (name, len) in [("exponents", sch.exponents.len()), ("onsets", sch.onsets.len())] {
                if len != 0 && len != self.alternative.len() {
                    return validation(format!(
                        "schedule.{name} has {len} entries for {} alternative pieces",
                        self.alternative.len()
                    ));
                }
            }
        }
        if self.sim.epsilon_list.iter().any(|e| !(*e > 0.0)) {
            return validation("epsilon_list entries must be positive");
        }
        if self.sim.n_grid.contains(&0) {
            return validation("n_grid entries must be at least 1");
        }
        Ok(())
    }

    fn members(&self) -> impl Iterator<Item = &ModelSpec> {
        self.hypothesis.iter().chain(&self.alternative)
    }

    /// The scenario's partition, or the default: every atom its own cell for
    /// finite alphabets, `{(0,½], (½,1)}` for densities.
    pub fn partition(&self) -> Result<Partition> {
        if let Some(p) = &self.partition {
            return Ok(p.clone());
        }
        match &self.hypothesis[0] {
            ModelSpec::Finite { weights } => Partition::identity(weights.alphabet_size()),
            ModelSpec::Density(_) => Ok(Partition::half_split()),
            ModelSpec::Poisson { shape, .. } => Partition::identity(shape.alphabet_size()),
            ModelSpec::GaussianSequence { .. } => validation("sequence models have no partition"),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.model.grid_size.unwrap_or(DEFAULT_GRID_SIZE)
    }

    fn laws(list: &[ModelSpec]) -> Result<Vec<Law>> {
        list.iter()
            .map(|m| m.law().ok_or_else(|| Error::Validation(format!("{} is not an i.i.d. model", m.label()))))
            .collect()
    }

    fn finite_set(&self, list: &[ModelSpec]) -> Result<Vec<FiniteMeasure>> {
        list.iter()
            .map(|m| match m {
                ModelSpec::Finite { weights } => Ok(weights.clone()),
                ModelSpec::Density(d) => discretize(d, self.grid_size()),
                other => validation(format!("{} has no finite-alphabet form", other.label())),
            })
            .collect()
    }

    fn signals(list: &[ModelSpec]) -> Vec<Vec<f64>> {
        list.iter()
            .filter_map(|m| match m {
                ModelSpec::GaussianSequence { signal } => Some(signal.clone()),
                _ => None,
            })
            .collect()
    }

    fn poisson_models(list: &[ModelSpec]) -> Vec<PoissonModel> {
        list.iter()
            .filter_map(|m| match m {
                ModelSpec::Poisson { mass, shape } => Some(PoissonModel {
                    mass: *mass,
                    shape: shape.clone(),
                }),
                _ => None,
            })
            .collect()
    }
}

fn labels(list: &[ModelSpec]) -> Vec<String> {
    list.iter().map(ModelSpec::label).collect()
}

fn finite(w: &[f64]) -> Result<ModelSpec> {
    Ok(ModelSpec::Finite {
        weights: FiniteMeasure::new(w.to_vec())?,
    })
}

// ---------------------------------------------------------------------------
// Builders

/// Uniform against `1 + sin(2π i x)`, `i = 1..=i_max`.
pub fn scenario_sine_indistinguishable(i_max: u32, grid_size: usize, partition: Partition) -> Result<Scenario> {
    if i_max == 0 {
        return validation("i_max must be at least 1");
    }
    let s = Scenario {
        name: format!("sine_indistinguishable_{i_max}"),
        hypothesis: vec![ModelSpec::Density(DensitySpec::Uniform)],
        alternative: (1..=i_max)
            .map(|frequency| ModelSpec::Density(DensitySpec::OnePlusSine { frequency }))
            .collect(),
        model: ModelConfig {
            grid_size: Some(grid_size),
            ..ModelConfig::of(ModelKind::Density)
        },
        partition: Some(partition),
        schedule: None,
        sim: SimConfig::default(),
    };
    s.validate()?;
    Ok(s)
}

/// Uniform against the Cesàro means of the sine densities, orders `1..=m_max`.
pub fn scenario_mazur_mixture(m_max: u32, grid_size: usize) -> Result<Scenario> {
    if m_max == 0 {
        return validation("m_max must be at least 1");
    }
    let s = Scenario {
        name: format!("mazur_mixture_{m_max}"),
        hypothesis: vec![ModelSpec::Density(DensitySpec::Uniform)],
        alternative: (1..=m_max)
            .map(|order| ModelSpec::Density(DensitySpec::CesaroMixture { order }))
            .collect(),
        model: ModelConfig {
            grid_size: Some(grid_size),
            ..ModelConfig::of(ModelKind::Density)
        },
        partition: None,
        schedule: None,
        sim: SimConfig::default(),
    };
    s.validate()?;
    Ok(s)
}

/// `P_0` uniform against `P_u = P_0 + uG` for each `u`, on the half split.
pub fn scenario_kolmogorov_family(u_list: &[f64], n_grid: &[u64]) -> Result<Scenario> {
    if u_list.is_empty() {
        return validation("u_list is empty");
    }
    let s = Scenario {
        name: "kolmogorov_family".into(),
        hypothesis: vec![ModelSpec::Density(DensitySpec::PuFamily { u: 0.0 })],
        alternative: u_list
            .iter()
            .map(|&u| ModelSpec::Density(DensitySpec::PuFamily { u }))
            .collect(),
        model: ModelConfig::of(ModelKind::Density),
        partition: Some(Partition::half_split()),
        schedule: None,
        sim: SimConfig {
            n_grid: n_grid.to_vec(),
            ..SimConfig::default()
        },
    };
    s.validate()?;
    Ok(s)
}

fn pad(v: &[f64], d: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(d, 0.0);
    out
}

/// Finite signal sets in the `d`-dimensional sequence model.
pub fn scenario_signal_detection(
    theta0: &[Vec<f64>],
    theta1: &[Vec<f64>],
    d: usize,
    epsilon_list: &[f64],
) -> Result<Scenario> {
    if d == 0 {
        return validation("dimension must be at least 1");
    }
    if theta0.iter().chain(theta1).any(|v| v.len() > d) {
        return validation(format!("signals longer than d = {d}"));
    }
    let h0: Vec<Vec<f64>> = theta0.iter().map(|v| pad(v, d)).collect();
    let h1: Vec<Vec<f64>> = theta1.iter().map(|v| pad(v, d)).collect();
    let r = separation_of_vectors(h0.clone(), h1.clone())?;
    if !r.is_separated() {
        return Err(Error::Construction("signal sets have zero separation".into()));
    }
    let member = |signal| ModelSpec::GaussianSequence { signal };
    let s = Scenario {
        name: "signal_detection".into(),
        hypothesis: h0.into_iter().map(member).collect(),
        alternative: h1.into_iter().map(member).collect(),
        model: ModelConfig::of(ModelKind::GaussianSequence),
        partition: None,
        schedule: None,
        sim: SimConfig {
            replications: 100_000,
            epsilon_list: epsilon_list.to_vec(),
            ..SimConfig::default()
        },
    };
    s.validate()?;
    Ok(s)
}

/// Nested alternatives `∪_{j<=i} piece_j` against a finite hypothesis set.
/// Each piece is one alternative law with an optional exponent.
pub fn scenario_nested_alternatives(
    hypothesis: &[Vec<f64>],
    pieces: &[(Vec<f64>, Option<f64>)],
    n_max: u64,
) -> Result<Scenario> {
    if pieces.is_empty() {
        return validation("need at least one alternative piece");
    }
    let h0 = hypothesis.iter().map(|w| finite(w)).collect::<Result<Vec<_>>>()?;
    let h1 = pieces.iter().map(|(w, _)| finite(w)).collect::<Result<Vec<_>>>()?;
    let exponents: Vec<f64> = if pieces.iter().all(|p| p.1.is_some()) {
        pieces.iter().map(|p| p.1.unwrap()).collect()
    } else if pieces.iter().all(|p| p.1.is_none()) {
        Vec::new()
    } else {
        return validation("give an exponent for every piece or for none");
    };
    let s = Scenario {
        name: "nested_alternatives".into(),
        hypothesis: h0,
        alternative: h1,
        model: ModelConfig::of(ModelKind::Finite),
        partition: None,
        schedule: Some(ScheduleConfig {
            exponents,
            onsets: Vec::new(),
            n_max: Some(n_max),
        }),
        sim: SimConfig {
            replications: 1000,
            k_grid: default_k_grid(n_max),
            ..SimConfig::default()
        },
    };
    s.validate()?;
    build_family(&s)?;
    Ok(s)
}

/// Poisson processes with the given mean measures.
pub fn scenario_poisson(h0: &[PoissonModel], h1: &[PoissonModel], n_grid: &[u64]) -> Result<Scenario> {
    let member = |m: &PoissonModel| ModelSpec::Poisson {
        mass: m.mass,
        shape: m.shape.clone(),
    };
    let s = Scenario {
        name: "poisson".into(),
        hypothesis: h0.iter().map(member).collect(),
        alternative: h1.iter().map(member).collect(),
        model: ModelConfig::of(ModelKind::Poisson),
        partition: None,
        schedule: None,
        sim: SimConfig {
            n_grid: n_grid.to_vec(),
            ..SimConfig::default()
        },
    };
    s.validate()?;
    check_poisson_nondegenerate(h0, h1)?;
    Ok(s)
}

fn default_k_grid(n_max: u64) -> Vec<u64> {
    let mut ks = vec![0];
    let mut k = 1;
    while k < n_max {
        ks.push(k);
        k *= 2;
    }
    ks.push(n_max);
    ks
}

// ---------------------------------------------------------------------------
// Closed-form helpers

/// Sup-norm margin between `{uniform}` and `{1 + sin(2π i x)}` on `partition`.
pub fn sine_margin(i: u32, partition: &Partition) -> Result<f64> {
    let r = separation(
        &[Law::Density(DensitySpec::Uniform)],
        &[Law::Density(DensitySpec::OnePlusSine { frequency: i })],
        partition,
    )?;
    Ok(r.margin)
}

/// Total variation between the uniform law and the Cesàro mean of order `m`.
pub fn mazur_distance(m: u32) -> Result<f64> {
    density_total_variation(&DensitySpec::Uniform, &DensitySpec::CesaroMixture { order: m })
}

/// Sup-norm margin after keeping only the first `m` coordinates.
pub fn projection_margin(theta0: &[Vec<f64>], theta1: &[Vec<f64>], m: usize) -> Result<f64> {
    let cut = |s: &[Vec<f64>]| s.iter().map(|v| v[..m.min(v.len())].to_vec()).collect();
    Ok(separation_of_vectors(cut(theta0), cut(theta1))?.margin)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `α + β = 2Φ(−‖s1 − s0‖ / (2ε))` for the midpoint linear test of a pair.
pub fn linear_test_error(s0: &[f64], s1: &[f64], epsilon: f64) -> f64 {
    let dist = s0.iter().zip(s1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    2.0 * std_normal().cdf(-dist / (2.0 * epsilon))
}

/// Smallest deviation `x ∈ (0, λ)` whose atom-count bound is at most `n^{-2}`,
/// or `None` when no such `x` exists.
pub fn poisson_threshold(lambda: f64, n: u64) -> Result<Option<f64>> {
    let target = 1.0 / (n as f64 * n as f64);
    let f = |x: f64| poisson_atom_tail_bound(lambda, n, x);
    let hi = lambda * (1.0 - 1e-12);
    if f(hi)? > target {
        return Ok(None);
    }
    // the bound is decreasing in x
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

fn check_poisson_nondegenerate(h0: &[PoissonModel], h1: &[PoissonModel]) -> Result<()> {
    for (j, q) in h1.iter().enumerate() {
        for p in h0 {
            let same_shape = p
                .shape
                .weights()
                .iter()
                .zip(q.shape.weights())
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if (p.mass - q.mass).abs() <= 1e-12 * p.mass.max(q.mass) && same_shape {
                return Err(Error::Degenerate(format!(
                    "alternative {} has the same mass and shape as a hypothesis member",
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Analyses

fn verdict_for(report: &SeparationReport, what: &str) -> Verdict {
    if report.is_separated() {
        Verdict::Ok
    } else {
        Verdict::Indistinguishable(format!("{what}: margin {:e} on this partition", report.margin))
    }
}

fn witness_json(r: &SeparationReport) -> serde_json::Value {
    json!({
        "hypothesis_index": r.witness_pair.hypothesis_index + 1,
        "alternative_index": r.witness_pair.alternative_index + 1,
        "hypothesis_vector": r.witness_pair.hypothesis_vector,
        "alternative_vector": r.witness_pair.alternative_vector,
    })
}

/// Induced vector of the discretized density on an interval partition.
fn discretized_induced(spec: &DensitySpec, partition: &Partition, grid: usize) -> Result<Vec<f64>> {
    let m = discretize(spec, grid)?;
    let mut v = vec![0.0; partition.len()];
    for (j, w) in m.weights().iter().enumerate() {
        let mid = (j as f64 + 0.5) / grid as f64;
        v[partition.cell_of_point(mid).expect("interval partition")] += w;
    }
    Ok(v)
}

fn to_measures(vs: &[Vec<f64>]) -> Result<Vec<FiniteMeasure>> {
    vs.iter().map(|v| normalize(v)).collect()
}

/// Margin, witness pair and one-observation Kraft bound on the partition.
pub fn distinguish(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    match s.model.kind {
        ModelKind::Finite | ModelKind::Density => distinguish_iid(s),
        ModelKind::GaussianSequence => distinguish_sequence(s),
        ModelKind::Poisson => distinguish_poisson(s),
    }
}

fn distinguish_iid(s: &Scenario) -> Result<RunOutput> {
    let partition = s.partition()?;
    let h0 = Scenario::laws(&s.hypothesis)?;
    let h1 = Scenario::laws(&s.alternative)?;
    let report = separation(&h0, &h1, &partition)?;
    let hull = hull_variation(&to_measures(&report.v0)?, &to_measures(&report.v1)?)?;
    let density = s.model.kind == ModelKind::Density;

    let mut table = Table::new(
        "margins",
        &["alternative", "label", "margin", "margin_discretized", "separated"],
    );
    for (j, law) in h1.iter().enumerate() {
        let r = separation(&h0, std::slice::from_ref(law), &partition)?;
        let disc = if density && partition.is_interval() {
            let v0 = s
                .hypothesis
                .iter()
                .map(|m| match m {
                    ModelSpec::Density(d) => discretized_induced(d, &partition, s.grid_size()),
                    _ => unreachable!("validated density scenario"),
                })
                .collect::<Result<Vec<_>>>()?;
            let ModelSpec::Density(d) = &s.alternative[j] else { unreachable!() };
            let v1 = vec![discretized_induced(d, &partition, s.grid_size())?];
            Field::from(separation_of_vectors(v0, v1)?.margin)
        } else {
            Field::Missing
        };
        table.push(vec![
            (j + 1).into(),
            s.alternative[j].label().into(),
            r.margin.into(),
            disc,
            u64::from(r.is_separated()).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "cells": partition.len(),
        "margin": report.margin,
        "separated": report.is_separated(),
        "witness": witness_json(&report),
        "kraft_bound": 1.0 - hull.value,
        "hull_variation": hull.value,
    });
    Ok(RunOutput {
        command: "distinguish".into(),
        verdict: verdict_for(&report, "hypothesis against alternative"),
        summary,
        tables: vec![table],
    })
}

fn projection_levels(s: &Scenario, d: usize) -> Vec<usize> {
    let mut levels = s.model.projection_levels.clone().unwrap_or_else(|| {
        let mut v = Vec::new();
        let mut m = 1;
        while m < d {
            v.push(m);
            m *= 2;
        }
        v.push(d);
        v
    });
    levels.retain(|m| *m >= 1 && *m <= d);
    levels.sort_unstable();
    levels.dedup();
    levels
}

fn distinguish_sequence(s: &Scenario) -> Result<RunOutput> {
    let h0 = Scenario::signals(&s.hypothesis);
    let h1 = Scenario::signals(&s.alternative);
    let report = separation_of_vectors(h0.clone(), h1.clone())?;
    let d = h0[0].len();
    let mut table = Table::new("projection", &["m", "margin", "fraction_of_full"]);
    for m in projection_levels(s, d) {
        let pm = projection_margin(&h0, &h1, m)?;
        let frac = if report.margin > 0.0 { Field::from(pm / report.margin) } else { Field::Missing };
        table.push(vec![m.into(), pm.into(), frac]);
    }
    let summary = json!({
        "scenario": s.name,
        "dimension": d,
        "margin": report.margin,
        "separated": report.is_separated(),
        "witness": witness_json(&report),
        "kraft_bound": null,
    });
    Ok(RunOutput {
        command: "distinguish".into(),
        verdict: verdict_for(&report, "signal sets"),
        summary,
        tables: vec![table],
    })
}

fn distinguish_poisson(s: &Scenario) -> Result<RunOutput> {
    let h0 = Scenario::poisson_models(&s.hypothesis);
    let h1 = Scenario::poisson_models(&s.alternative);
    let mean = |v: &[PoissonModel]| v.iter().map(PoissonModel::mean_measure).collect::<Vec<_>>();
    let report = separation_of_vectors(mean(&h0), mean(&h1))?;
    let mut table = Table::new("margins", &["alternative", "label", "margin", "separated"]);
    for (j, q) in h1.iter().enumerate() {
        let r = separation_of_vectors(mean(&h0), vec![q.mean_measure()])?;
        table.push(vec![
            (j + 1).into(),
            s.alternative[j].label().into(),
            r.margin.into(),
            u64::from(r.is_separated()).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "margin": report.margin,
        "separated": report.is_separated(),
        "witness": witness_json(&report),
        "kraft_bound": null,
    });
    Ok(RunOutput {
        command: "distinguish".into(),
        verdict: verdict_for(&report, "mean measures"),
        summary,
        tables: vec![table],
    })
}

/// Hull variational distance and Kraft bound between the (discretized) sets.
pub fn bound(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    if !matches!(s.model.kind, ModelKind::Finite | ModelKind::Density) {
        return validation("bound needs finite-alphabet or density models");
    }
    let a = s.finite_set(&s.hypothesis)?;
    let b = s.finite_set(&s.alternative)?;
    let hull = hull_variation(&a, &b)?;

    let mut prefix = Table::new("prefix_bounds", &["m", "hull_variation", "kraft_bound"]);
    for m in 1..=b.len() {
        let h = if m == b.len() { hull.clone() } else { hull_variation(&a, &b[..m])? };
        prefix.push(vec![m.into(), h.value.into(), (1.0 - h.value).into()]);
    }

    let mut members = Table::new(
        "member_distances",
        &["alternative", "label", "tv_discretized", "tv_exact", "ks_exact", "kraft_bound_exact"],
    );
    for (j, q) in b.iter().enumerate() {
        let tv_disc = a
            .iter()
            .map(|p| total_variation(p, q))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let (tv, ks) = match &s.alternative[j] {
            ModelSpec::Density(dq) => {
                let mut tv = f64::INFINITY;
                let mut ks = f64::INFINITY;
                for m in &s.hypothesis {
                    let ModelSpec::Density(dp) = m else { unreachable!("validated density scenario") };
                    tv = tv.min(density_total_variation(dp, dq)?);
                    ks = ks.min(ks_distance(dp, dq)?);
                }
                (Some(tv), Some(ks))
            }
            _ => (None, None),
        };
        members.push(vec![
            (j + 1).into(),
            s.alternative[j].label().into(),
            tv_disc.into(),
            tv.into(),
            ks.into(),
            tv.map(|t| 1.0 - t).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "alphabet_size": a[0].alphabet_size(),
        "discretized": s.model.kind == ModelKind::Density,
        "hull_variation": hull.value,
        "kraft_bound": 1.0 - hull.value,
        "mixture_hypothesis": hull.mixture_p,
        "mixture_alternative": hull.mixture_q,
        "lp_iterations": hull.lp_iterations,
        "hypothesis": labels(&s.hypothesis),
        "alternative": labels(&s.alternative),
    });
    Ok(RunOutput {
        command: "bound".into(),
        verdict: Verdict::Ok,
        summary,
        tables: vec![prefix, members],
    })
}

/// Distinct stream for each (table, grid point, role, member) combination.
fn stream_id(section: u64, point: u64, role: Role, member: usize) -> u64 {
    let r = match role {
        Role::Hypothesis => 0,
        Role::Alternative => 1,
    };
    (section << 56) ^ (point << 20) ^ (r << 19) ^ member as u64
}

fn worst(reports: &[SimulationReport]) -> &SimulationReport {
    reports
        .iter()
        .fold(&reports[0], |a, b| if b.estimate > a.estimate { b } else { a })
}

/// Error curves of the scenario's natural test.
pub fn simulate(s: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    s.validate()?;
    if settings.replications(s) == 0 {
        return validation("replications must be positive");
    }
    match s.model.kind {
        ModelKind::Finite | ModelKind::Density => simulate_iid(s, settings),
        ModelKind::GaussianSequence => simulate_sequence(s, settings),
        ModelKind::Poisson => simulate_poisson(s, settings),
    }
}

fn exact_worst(test: &FrequencyTest, vectors: &[Vec<f64>], n: u64, role: Role) -> Result<Option<f64>> {
    let mut worst: f64 = 0.0;
    let t = test.with_sample_size(n);
    for v in vectors {
        match exact_outcome(&t, v, n) {
            Ok(o) => worst = worst.max(o.error(role)),
            Err(Error::Resource(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(worst))
}

fn simulate_iid(s: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    let partition = s.partition()?;
    let h0 = Scenario::laws(&s.hypothesis)?;
    let h1 = Scenario::laws(&s.alternative)?;
    let report = separation(&h0, &h1, &partition)?;
    let test = build_frequency_test(&report, 1)?;
    let cert = test.certificate();
    let reps = settings.replications(s);
    let density = s.model.kind == ModelKind::Density && partition.is_interval();
    let disc = if density {
        let ind = |list: &[ModelSpec]| {
            list.iter()
                .map(|m| match m {
                    ModelSpec::Density(d) => discretized_induced(d, &partition, s.grid_size()),
                    _ => unreachable!("validated density scenario"),
                })
                .collect::<Result<Vec<_>>>()
        };
        Some((ind(&s.hypothesis)?, ind(&s.alternative)?))
    } else {
        None
    };
    let samplers0 = h0
        .iter()
        .map(|l| CellSampler::new(l.clone(), partition.clone()))
        .collect::<Result<Vec<_>>>()?;
    let samplers1 = h1
        .iter()
        .map(|l| CellSampler::new(l.clone(), partition.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "error_curve",
        &[
            "n",
            "alpha_exact",
            "beta_exact",
            "sum_exact",
            "alpha_exact_discretized",
            "beta_exact_discretized",
            "alpha_mc",
            "alpha_mc_lower",
            "alpha_mc_upper",
            "beta_mc",
            "beta_mc_lower",
            "beta_mc_upper",
            "sum_mc",
            "alpha_bound",
            "beta_bound",
        ],
    );
    let mut ns = s.sim.n_grid.clone();
    if ns.is_empty() {
        ns = vec![1, 2, 4, 8, 16, 32, 64, 128];
    }
    for &n in &ns {
        let a_exact = exact_worst(&test, &report.v0, n, Role::Hypothesis)?;
        let b_exact = exact_worst(&test, &report.v1, n, Role::Alternative)?;
        let (a_disc, b_disc) = match &disc {
            Some((d0, d1)) => (
                exact_worst(&test, d0, n, Role::Hypothesis)?,
                exact_worst(&test, d1, n, Role::Alternative)?,
            ),
            None => (None, None),
        };
        let run = |samplers: &[CellSampler], role: Role| -> Result<Vec<SimulationReport>> {
            samplers
                .iter()
                .enumerate()
                .map(|(i, smp)| {
                    let rng = RngSpec::new(settings.seed, stream_id(1, n, role, i));
                    estimate_error(&test, smp, role, n, reps, rng, ("", "frequency"))
                })
                .collect()
        };
        let ra = run(&samplers0, Role::Hypothesis)?;
        let rb = run(&samplers1, Role::Alternative)?;
        let (wa, wb) = (worst(&ra), worst(&rb));
        table.push(vec![
            n.into(),
            a_exact.into(),
            b_exact.into(),
            a_exact.zip(b_exact).map(|(a, b)| a + b).into(),
            a_disc.into(),
            b_disc.into(),
            wa.estimate.into(),
            wa.ci_lower.into(),
            wa.ci_upper.into(),
            wb.estimate.into(),
            wb.ci_lower.into(),
            wb.ci_upper.into(),
            (wa.estimate + wb.estimate).into(),
            cert.alpha(n).into(),
            cert.beta(n).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "seed": settings.seed,
        "replications": reps,
        "margin": report.margin,
        "cells": partition.len(),
        "test": "nearest-set frequency test (sup-norm)",
        "certified_rate": cert.min_rate(),
    });
    Ok(RunOutput {
        command: "simulate".into(),
        verdict: Verdict::Ok,
        summary,
        tables: vec![table],
    })
}

/// Midpoint test of `s0` against `s1` along `f = s1 − s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPairTest {
    pub s0: Vec<f64>,
    pub direction: Vec<f64>,
    pub threshold: f64,
}

impl LinearPairTest {
    pub fn new(s0: &[f64], s1: &[f64]) -> Result<Self> {
        let direction: Vec<f64> = s1.iter().zip(s0).map(|(a, b)| a - b).collect();
        let norm2: f64 = direction.iter().map(|x| x * x).sum();
        if !(norm2 > 0.0) {
            return Err(Error::Construction("identical signals give no separating functional".into()));
        }
        Ok(Self {
            s0: s0.to_vec(),
            direction,
            threshold: norm2 / 2.0,
        })
    }

    pub fn decide(&self, y: &[f64]) -> Decision {
        let stat: f64 = self
            .direction
            .iter()
            .zip(y.iter().zip(&self.s0))
            .map(|(f, (yj, sj))| f * (yj - sj))
            .sum();
        if stat > self.threshold {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

fn simulate_sequence(s: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    let h0 = Scenario::signals(&s.hypothesis);
    let h1 = Scenario::signals(&s.alternative);
    let report = separation_of_vectors(h0.clone(), h1.clone())?;
    if !report.is_separated() {
        return Err(Error::Construction("signal sets have zero separation".into()));
    }
    let reps = settings.replications(s);
    let mut eps = s.sim.epsilon_list.clone();
    if eps.is_empty() {
        eps = vec![1.0, 0.5, 0.2, 0.1];
    }
    let mut table = Table::new(
        "epsilon_sweep",
        &[
            "epsilon",
            "sum_exact",
            "alpha_mc",
            "beta_mc",
            "sum_mc",
            "sum_mc_upper",
            "worst_hypothesis",
            "worst_alternative",
        ],
    );
    for (e_idx, &epsilon) in eps.iter().enumerate() {
        let mut best: Option<(f64, f64, SimulationReport, SimulationReport, usize, usize)> = None;
        for (i, s0) in h0.iter().enumerate() {
            for (j, s1) in h1.iter().enumerate() {
                let test = LinearPairTest::new(s0, s1)?;
                let exact = linear_test_error(s0, s1, epsilon);
                let pair = (i * h1.len() + j) as u64;
                let run = |signal: &[f64], role: Role| {
                    let model = GaussianSequenceModel::new(signal.to_vec(), epsilon)?;
                    let rng = RngSpec::new(settings.seed, stream_id(2, e_idx as u64, role, pair as usize));
                    let wrong = role.error_decision();
                    estimate_probability(reps, rng, "", "linear", |r| {
                        Ok(test.decide(&sample_gaussian_sequence(&model, r)) == wrong)
                    })
                };
                let ra = run(s0, Role::Hypothesis)?;
                let rb = run(s1, Role::Alternative)?;
                let sum = ra.estimate + rb.estimate;
                if best.as_ref().is_none_or(|b| sum > b.1) {
                    best = Some((exact, sum, ra, rb, i, j));
                }
            }
        }
        let (_, sum, ra, rb, i, j) = best.expect("nonempty signal sets");
        let exact_max = h0
            .iter()
            .flat_map(|a| h1.iter().map(move |b| linear_test_error(a, b, epsilon)))
            .fold(0.0, f64::max);
        table.push(vec![
            epsilon.into(),
            exact_max.into(),
            ra.estimate.into(),
            rb.estimate.into(),
            sum.into(),
            (ra.ci_upper + rb.ci_upper).into(),
            (i + 1).into(),
            (j + 1).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "seed": settings.seed,
        "replications": reps,
        "margin": report.margin,
        "test": "pairwise midpoint linear statistics",
    });
    Ok(RunOutput {
        command: "simulate".into(),
        verdict: Verdict::Ok,
        summary,
        tables: vec![table],
    })
}

/// Atom-count check against every hypothesis mass, then a frequency test
/// on the atoms' empirical measure.
#[derive(Debug, Clone)]
pub struct PoissonTwoStageTest {
    pub masses: Vec<f64>,
    /// Deviation per hypothesis mass; `None` disables the count stage for it.
    pub thresholds: Vec<Option<f64>>,
    pub n: u64,
    pub shape_test: Option<FrequencyTest>,
}

impl PoissonTwoStageTest {
    pub fn new(h0: &[PoissonModel], h1: &[PoissonModel], n: u64) -> Result<Self> {
        check_poisson_nondegenerate(h0, h1)?;
        let thresholds = h0
            .iter()
            .map(|p| poisson_threshold(p.mass, n))
            .collect::<Result<Vec<_>>>()?;
        let v0: Vec<Vec<f64>> = h0.iter().map(|p| p.shape.weights().to_vec()).collect();
        let v1: Vec<Vec<f64>> = h1
            .iter()
            .map(|q| q.shape.weights().to_vec())
            .filter(|w| {
                v0.iter()
                    .all(|v| v.iter().zip(w).any(|(a, b)| (a - b).abs() > 1e-12))
            })
            .collect();
        let shape_test = if v1.is_empty() {
            None
        } else {
            Some(build_frequency_test(&separation_of_vectors(v0, v1)?, n)?)
        };
        Ok(Self {
            masses: h0.iter().map(|p| p.mass).collect(),
            thresholds,
            n,
            shape_test,
        })
    }

    pub fn count_rejects(&self, count: u64) -> bool {
        let n = self.n as f64;
        self.masses.iter().zip(&self.thresholds).all(|(lambda, x)| match x {
            Some(x) => (count as f64 - n * lambda).abs() > n * x,
            None => false,
        })
    }

    pub fn decide(&self, count: u64, atom_counts: &[u64]) -> Decision {
        if self.count_rejects(count) {
            return Decision::Reject;
        }
        match &self.shape_test {
            Some(t) => t.decide(atom_counts),
            None => Decision::Accept,
        }
    }
}

fn simulate_poisson(s: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    let h0 = Scenario::poisson_models(&s.hypothesis);
    let h1 = Scenario::poisson_models(&s.alternative);
    check_poisson_nondegenerate(&h0, &h1)?;
    let reps = settings.replications(s);
    let mut ns = s.sim.n_grid.clone();
    if ns.is_empty() {
        ns = vec![1, 2, 4, 8, 16, 32, 64, 128];
    }
    let mut table = Table::new(
        "error_curve",
        &[
            "n",
            "count_threshold",
            "count_stage_bound",
            "alpha_mc",
            "alpha_mc_upper",
            "beta_mc",
            "beta_mc_upper",
            "sum_mc",
        ],
    );
    for &n in &ns {
        let test = PoissonTwoStageTest::new(&h0, &h1, n)?;
        let run = |models: &[PoissonModel], role: Role| -> Result<Vec<SimulationReport>> {
            models
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let rng = RngSpec::new(settings.seed, stream_id(3, n, role, i));
                    let wrong = role.error_decision();
                    let cum = m.shape.cumulative();
                    estimate_probability(reps, rng, "", "two-stage", |r| {
                        let count = sample_poisson_count(m, n, r)?;
                        let mut atoms = vec![0u64; cum.len()];
                        for _ in 0..count {
                            atoms[crate::simulation::draw_atom(&cum, r)] += 1;
                        }
                        Ok(test.decide(count, &atoms) == wrong)
                    })
                })
                .collect()
        };
        let ra = run(&h0, Role::Hypothesis)?;
        let rb = run(&h1, Role::Alternative)?;
        let (wa, wb) = (worst(&ra), worst(&rb));
        let x0 = test.thresholds[0];
        let count_bound = x0.map(|x| poisson_atom_tail_bound(h0[0].mass, n, x)).transpose()?;
        table.push(vec![
            n.into(),
            x0.into(),
            count_bound.map(|b| b.min(1.0)).into(),
            wa.estimate.into(),
            wa.ci_upper.into(),
            wb.estimate.into(),
            wb.ci_upper.into(),
            (wa.estimate + wb.estimate).into(),
        ]);
    }
    let summary = json!({
        "scenario": s.name,
        "seed": settings.seed,
        "replications": reps,
        "test": "atom-count threshold then frequency test on atom shapes",
    });
    Ok(RunOutput {
        command: "simulate".into(),
        verdict: Verdict::Ok,
        summary,
        tables: vec![table],
    })
}

/// Nested test family built from the scenario's alternative pieces.
pub fn build_family(s: &Scenario) -> Result<TestFamily<CertifiedSequence>> {
    if !matches!(s.model.kind, ModelKind::Finite | ModelKind::Density) {
        return validation("schedules need finite-alphabet or density models");
    }
    let partition = s.partition()?;
    let h0 = Scenario::laws(&s.hypothesis)?;
    let h1 = Scenario::laws(&s.alternative)?;
    let cfg = s.schedule.clone().unwrap_or_default();
    let mut pieces = Vec::with_capacity(h1.len());
    for (j, q) in h1.iter().enumerate() {
        let r = separation(&h0, std::slice::from_ref(q), &partition)?;
        if !r.is_separated() {
            return Err(Error::Construction(format!(
                "piece {} ({}) has zero margin",
                j + 1,
                s.alternative[j].label()
            )));
        }
        let t = build_frequency_test(&r, 1)?;
        pieces.push((CertifiedSequence::from_frequency_test(t), cfg.exponents.get(j).copied()));
    }
    let fam = nested_family(&pieces)?;
    if cfg.onsets.is_empty() {
        return Ok(fam);
    }
    let members = fam
        .members()
        .iter()
        .zip(&cfg.onsets)
        .map(|(m, o)| crate::scheduler::FamilyMember {
            onset: m.onset.max(*o),
            ..m.clone()
        })
        .collect();
    TestFamily::new(members)
}

/// The interleaved schedule for the scenario.
pub fn build_schedule(s: &Scenario) -> Result<(TestFamily<CertifiedSequence>, TestSchedule)> {
    let fam = build_family(s)?;
    let n_max = s.schedule.as_ref().and_then(|c| c.n_max).unwrap_or(DEFAULT_N_MAX);
    let sched = interleave(&fam, n_max)?;
    Ok((fam, sched))
}

/// Schedule plus the empirical error-after-k curve for every member.
pub fn schedule(s: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    s.validate()?;
    let (fam, sched) = build_schedule(s)?;
    let partition = s.partition()?;
    let reps = settings.replications(s);
    let mut blocks = Table::new(
        "schedule_blocks",
        &["start", "end", "family", "exponent", "onset", "certified_bound"],
    );
    for b in &sched.blocks {
        blocks.push(vec![
            b.start.into(),
            b.end.into(),
            b.family.into(),
            b.exponent.into(),
            b.onset.into(),
            b.certified_bound.into(),
        ]);
    }
    let mut chain = Table::new("tail_chain", &["t", "boundary", "certified_tail", "chain_bound"]);
    for (t, b) in sched.boundaries().iter().enumerate() {
        chain.push(vec![
            (t + 1).into(),
            (*b).into(),
            sched.tail_after(*b, 1).into(),
            sched.chain_bound(t + 1).into(),
        ]);
    }

    let mut curve = Table::new(
        "discernibility",
        &["role", "member", "label", "k", "error_after", "paths", "standard_error", "tail_bound"],
    );
    let mut k_star = Vec::new();
    let mut base_grid = if s.sim.k_grid.is_empty() { default_k_grid(sched.n_max) } else { s.sim.k_grid.clone() };
    base_grid.retain(|k| *k <= sched.n_max);
    let targets = s
        .hypothesis
        .iter()
        .enumerate()
        .map(|(i, m)| (Role::Hypothesis, i, m, 1usize))
        .chain(
            s.alternative
                .iter()
                .enumerate()
                .map(|(j, m)| (Role::Alternative, j, m, j + 1)),
        );
    for (role, idx, member, first_family) in targets {
        let law = member.law().expect("validated i.i.d. model");
        let sampler = CellSampler::new(law, partition.clone())?;
        let ks_level = sched.first_k_below(0.01, first_family);
        let mut ks = base_grid.clone();
        ks.extend(ks_level);
        let rng = RngSpec::new(settings.seed, stream_id(4, 0, role, idx));
        let c = discernibility_paths(&sched, &fam, &sampler, role, &ks, reps, rng)?;
        let role_name = match role {
            Role::Hypothesis => "hypothesis",
            Role::Alternative => "alternative",
        };
        for (i, k) in c.k_grid.iter().enumerate() {
            curve.push(vec![
                role_name.into(),
                (idx + 1).into(),
                member.label().into(),
                (*k).into(),
                c.error_after[i].into(),
                c.paths_with_error_after[i].into(),
                c.standard_error(i).into(),
                sched.tail_after(*k, first_family).into(),
            ]);
        }
        let after = ks_level.map(|k| c.error_after[c.k_grid.iter().position(|x| *x == k).expect("k in grid")]);
        k_star.push(json!({
            "role": role_name,
            "member": idx + 1,
            "k_tail_below_0.01": ks_level,
            "error_after_k": after,
        }));
    }
    let summary = json!({
        "scenario": s.name,
        "seed": settings.seed,
        "replications": reps,
        "schedule": sched,
        "families_covered": format!("{} of {}", sched.families_covered, sched.families_total),
        "tail_checkpoints": k_star,
    });
    Ok(RunOutput {
        command: "schedule".into(),
        verdict: Verdict::Ok,
        summary,
        tables: vec![blocks, chain, curve],
    })
}
