//! Probability measures on a finite alphabet or on `(0,1)`, partitions of
//! either base space, and the probability vectors a partition induces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::numeric::{adaptive_simpson, EXACT_TOL, QUADRATURE_TOL, SIMPSON_TOL};

/// A probability vector on the alphabet `{0, …, k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FiniteMeasure {
    weights: Vec<f64>,
}

impl FiniteMeasure {
    /// Validates an already-normalized weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > EXACT_TOL {
            return validation(format!("weights sum to {sum}, expected 1"));
        }
        Ok(Self { weights })
    }

    /// The point mass on `atom` in an alphabet of size `k`.
    pub fn dirac(k: usize, atom: usize) -> Result<Self> {
        if atom >= k {
            return validation(format!("atom {atom} outside alphabet of size {k}"));
        }
        let mut w = vec![0.0; k];
        w[atom] = 1.0;
        Ok(Self { weights: w })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return validation("alphabet size must be positive");
        }
        Ok(Self {
            weights: vec![1.0 / k as f64; k],
        })
    }

    /// Convex combination `Σ λ_i P_i`. The mixing weights are renormalized so
    /// that solver round-off cannot push the result off the simplex.
    pub fn mixture(components: &[FiniteMeasure], lambdas: &[f64]) -> Result<Self> {
        if components.is_empty() || components.len() != lambdas.len() {
            return validation("mixture needs one weight per component");
        }
        let k = components[0].alphabet_size();
        if components.iter().any(|c| c.alphabet_size() != k) {
            return validation("mixture components have different alphabet sizes");
        }
        let lambdas = normalize(lambdas)?;
        let mut w = vec![0.0; k];
        for (c, l) in components.iter().zip(lambdas.weights()) {
            for (acc, p) in w.iter_mut().zip(&c.weights) {
                *acc += l * p;
            }
        }
        normalize(&w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alphabet_size(&self) -> usize {
        self.weights.len()
    }

    /// Cumulative weights, with the last entry pinned to exactly 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        cdf
    }
}

impl TryFrom<Vec<f64>> for FiniteMeasure {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        FiniteMeasure::new(weights)
    }
}

impl From<FiniteMeasure> for Vec<f64> {
    fn from(m: FiniteMeasure) -> Self {
        m.weights
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return validation("empty weight vector");
    }
    for (j, w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return validation(format!("weight {j} is not finite"));
        }
        if *w < 0.0 {
            return validation(format!("weight {j} is negative ({w})"));
        }
    }
    Ok(())
}

/// Divides a nonnegative vector by its sum.
pub fn normalize(weights: &[f64]) -> Result<FiniteMeasure> {
    check_weights(weights)?;
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return validation("all weights are zero");
    }
    Ok(FiniteMeasure {
        weights: weights.iter().map(|w| w / sum).collect(),
    })
}

/// The named density families on `(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    /// Lebesgue measure.
    Uniform,
    /// `1 + sin(2π i x)`.
    OnePlusSine { frequency: u32 },
    /// Average of `1 + sin(2π j x)` over `j = 1..=order`.
    CesaroMixture { order: u32 },
    /// `1 - u` on `(0, 1/2]` and `1 + u` on `(1/2, 1)`.
    PuFamily { u: f64 },
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DensitySpec::Uniform => Ok(()),
            DensitySpec::OnePlusSine { frequency: 0 } => {
                validation("one_plus_sine needs frequency >= 1")
            }
            DensitySpec::CesaroMixture { order: 0 } => {
                validation("cesaro_mixture needs order >= 1")
            }
            DensitySpec::PuFamily { u } if !(0.0..1.0).contains(&u) => validation(format!(
                "pu_family needs 0 <= u < 1 for a nonnegative density, got {u}"
            )),
            _ => Ok(()),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::OnePlusSine { frequency } => 1.0 + (2.0 * PI * frequency as f64 * x).sin(),
            DensitySpec::CesaroMixture { order } => {
                let s: f64 = (1..=order).map(|j| (2.0 * PI * j as f64 * x).sin()).sum();
                1.0 + s / order as f64
            }
            DensitySpec::PuFamily { u } => {
                if x <= 0.5 {
                    1.0 - u
                } else {
                    1.0 + u
                }
            }
        }
    }

    /// Closed-form distribution function on `[0,1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let sine_part = |j: f64| (1.0 - (2.0 * PI * j * x).cos()) / (2.0 * PI * j);
        let v = match *self {
            DensitySpec::Uniform => x,
            DensitySpec::OnePlusSine { frequency } => x + sine_part(frequency as f64),
            DensitySpec::CesaroMixture { order } => {
                let s: f64 = (1..=order).map(|j| sine_part(j as f64)).sum();
                x + s / order as f64
            }
            DensitySpec::PuFamily { u } => {
                if x <= 0.5 {
                    (1.0 - u) * x
                } else {
                    0.5 * (1.0 - u) + (1.0 + u) * (x - 0.5)
                }
            }
        };
        v.clamp(0.0, 1.0)
    }

    /// `P((a, b])` from the closed-form distribution function.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// `P((a, b])` by adaptive Simpson quadrature of the density.
    pub fn mass_numeric(&self, a: f64, b: f64) -> f64 {
        // Split at the family's kinks/zeros so each piece is smooth.
        let mut pts: Vec<f64> = self
            .feature_points()
            .into_iter()
            .filter(|p| *p > a && *p < b)
            .collect();
        pts.insert(0, a);
        pts.push(b);
        pts.windows(2)
            .map(|w| adaptive_simpson(&|x| self.density(x), w[0], w[1], SIMPSON_TOL))
            .sum()
    }

    /// Points in `[0,1]` where the density has a kink, jump or zero crossing of
    /// its oscillating part.
    pub fn feature_points(&self) -> Vec<f64> {
        let mut pts = vec![0.0, 1.0];
        match *self {
            DensitySpec::Uniform => {}
            DensitySpec::OnePlusSine { frequency } => {
                let m = 2 * frequency;
                pts.extend((1..m).map(|j| j as f64 / m as f64));
            }
            DensitySpec::CesaroMixture { order } => {
                // Σ_{j≤m} sin(2πjx) = sin(πmx) sin(π(m+1)x) / sin(πx)
                pts.extend((1..order).map(|j| j as f64 / order as f64));
                pts.extend((1..=order).map(|j| j as f64 / (order + 1) as f64));
            }
            DensitySpec::PuFamily { .. } => pts.push(0.5),
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Highest oscillation frequency of the density, used to size sampling grids.
    pub fn max_frequency(&self) -> u32 {
        match *self {
            DensitySpec::Uniform | DensitySpec::PuFamily { .. } => 0,
            DensitySpec::OnePlusSine { frequency } => frequency,
            DensitySpec::CesaroMixture { order } => order,
        }
    }

    /// Inverse of [`DensitySpec::cdf`] on `(0,1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            DensitySpec::Uniform => p,
            DensitySpec::PuFamily { u } => {
                let half = 0.5 * (1.0 - u);
                if p <= half {
                    p / (1.0 - u)
                } else {
                    0.5 + (p - half) / (1.0 + u)
                }
            }
            _ => self.quantile_newton(p),
        }
    }

    // Newton iteration kept inside a shrinking bisection bracket.
    fn quantile_newton(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut x = p;
        for _ in 0..100 {
            let fx = self.cdf(x) - p;
            if fx.abs() < 1e-15 {
                return x;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 1e-15 {
                break;
            }
            let d = self.density(x);
            let newton = x - fx / d;
            x = if d > 1e-3 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

/// A probability law on one of the two supported base spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Law {
    Finite(FiniteMeasure),
    Density(DensitySpec),
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Finite(_) => Ok(()),
            Law::Density(d) => d.validate(),
        }
    }
}

impl From<FiniteMeasure> for Law {
    fn from(m: FiniteMeasure) -> Self {
        Law::Finite(m)
    }
}

impl From<DensitySpec> for Law {
    fn from(d: DensitySpec) -> Self {
        Law::Density(d)
    }
}

/// One cell of a partition: an interval `(lo, hi]` of `(0,1)` or a set of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Interval { lo: f64, hi: f64 },
    Atoms { atoms: Vec<usize> },
}

/// Disjoint cells covering either `(0,1)` or a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    cells: Vec<Cell>,
    kind: PartitionKind,
}

#[derive(Debug, Clone, PartialEq)]
enum PartitionKind {
    /// Sorted interval edges `0 = e_0 < e_1 < … < e_k = 1`.
    Intervals { edges: Vec<f64> },
    /// `atom -> cell` lookup.
    Atoms { cell_of: Vec<usize> },
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    cells: Vec<Cell>,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        Partition::new(r.cells)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr { cells: p.cells }
    }
}

impl Partition {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.len() < 2 {
            return validation("a partition needs at least two cells");
        }
        let kind = match &cells[0] {
            Cell::Interval { .. } => {
                let mut edges = vec![0.0];
                for (j, c) in cells.iter().enumerate() {
                    let Cell::Interval { lo, hi } = *c else {
                        return validation("cannot mix interval and atom cells");
                    };
                    let prev = *edges.last().unwrap();
                    if !(lo.is_finite() && hi.is_finite()) || lo != prev || hi <= lo {
                        return validation(format!(
                            "interval cell {j} ({lo}, {hi}] must start at {prev} and be nonempty"
                        ));
                    }
                    edges.push(hi);
                }
                if *edges.last().unwrap() != 1.0 {
                    return validation("interval cells must cover (0,1)");
                }
                PartitionKind::Intervals { edges }
            }
            Cell::Atoms { .. } => {
                let total: usize = cells
                    .iter()
                    .map(|c| match c {
                        Cell::Atoms { atoms } => atoms.len(),
                        Cell::Interval { .. } => 0,
                    })
                    .sum();
                let mut cell_of = vec![usize::MAX; total];
                for (j, c) in cells.iter().enumerate() {
                    let Cell::Atoms { atoms } = c else {
                        return validation("cannot mix interval and atom cells");
                    };
                    if atoms.is_empty() {
                        return validation(format!("atom cell {j} is empty"));
                    }
                    for &a in atoms {
                        if a >= total {
                            return validation(format!("atom {a} leaves a gap in the alphabet"));
                        }
                        if cell_of[a] != usize::MAX {
                            return validation(format!("atom {a} appears in two cells"));
                        }
                        cell_of[a] = j;
                    }
                }
                PartitionKind::Atoms { cell_of }
            }
        };
        Ok(Self { cells, kind })
    }

    /// Each atom of a `k`-letter alphabet in its own cell.
    pub fn identity(k: usize) -> Result<Self> {
        Self::new((0..k).map(|a| Cell::Atoms { atoms: vec![a] }).collect())
    }

    /// Cells `(e_{j-1}, e_j]` for interior breakpoints `e_1 < … < e_{k-1}`.
    pub fn from_breakpoints(breakpoints: &[f64]) -> Result<Self> {
        let mut edges = vec![0.0];
        edges.extend_from_slice(breakpoints);
        edges.push(1.0);
        Self::new(
            edges
                .windows(2)
                .map(|w| Cell::Interval { lo: w[0], hi: w[1] })
                .collect(),
        )
    }

    /// `k` equal-width intervals of `(0,1)`.
    pub fn equal_intervals(k: usize) -> Result<Self> {
        let bps: Vec<f64> = (1..k).map(|j| j as f64 / k as f64).collect();
        Self::from_breakpoints(&bps)
    }

    /// `{(0, 1/2], (1/2, 1)}`.
    pub fn half_split() -> Self {
        Self::from_breakpoints(&[0.5]).expect("valid breakpoints")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.kind, PartitionKind::Intervals { .. })
    }

    /// Alphabet size for atom partitions.
    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.kind {
            PartitionKind::Atoms { cell_of } => Some(cell_of.len()),
            PartitionKind::Intervals { .. } => None,
        }
    }

    /// Cell index of an atom (atom partitions only).
    pub fn cell_of_atom(&self, atom: usize) -> Option<usize> {
        match &self.kind {
            PartitionKind::Atoms { cell_of } => cell_of.get(atom).copied(),
            PartitionKind::Intervals { .. } => None,
        }
    }

    /// Cell index of a point of `(0,1)` (interval partitions only).
    pub fn cell_of_point(&self, x: f64) -> Option<usize> {
        match &self.kind {
            PartitionKind::Intervals { edges } => {
                // first edge >= x closes the cell (e_{j-1}, e_j]
                let j = edges[1..].partition_point(|e| *e < x);
                Some(j.min(self.cells.len() - 1))
            }
            PartitionKind::Atoms { .. } => None,
        }
    }

    /// Checks that `law` lives on this partition's base space.
    pub fn check_compatible(&self, law: &Law) -> Result<()> {
        match (&self.kind, law) {
            (PartitionKind::Intervals { .. }, Law::Density(d)) => d.validate(),
            (PartitionKind::Atoms { cell_of }, Law::Finite(m)) if m.alphabet_size() == cell_of.len() => {
                Ok(())
            }
            (PartitionKind::Atoms { cell_of }, Law::Finite(m)) => validation(format!(
                "partition covers {} atoms but the measure has {}",
                cell_of.len(),
                m.alphabet_size()
            )),
            (PartitionKind::Intervals { .. }, Law::Finite(_)) => {
                validation("interval partition applied to a finite-alphabet measure")
            }
            (PartitionKind::Atoms { .. }, Law::Density(_)) => {
                validation("atom partition applied to a density on (0,1)")
            }
        }
    }
}

/// `(P(A_1), …, P(A_k))` for the cells `A_j` of `partition`.
pub fn induced_vector(law: &Law, partition: &Partition) -> Result<Vec<f64>> {
    partition.check_compatible(law)?;
    let v = match (law, &partition.kind) {
        (Law::Finite(m), PartitionKind::Atoms { cell_of }) => {
            let mut v = vec![0.0; partition.len()];
            for (w, c) in m.weights().iter().zip(cell_of) {
                v[*c] += w;
            }
            v
        }
        (Law::Density(d), PartitionKind::Intervals { edges }) => {
            edges.windows(2).map(|w| d.mass(w[0], w[1])).collect()
        }
        _ => unreachable!("compatibility checked above"),
    };
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > QUADRATURE_TOL {
        return Err(Error::Numeric {
            message: format!("induced vector sums to {sum}"),
            iterations: 0,
        });
    }
    Ok(v)
}

/// Masses of `grid_size` equal-width sub-intervals of `(0,1)`.
pub fn discretize(spec: &DensitySpec, grid_size: usize) -> Result<FiniteMeasure> {
    spec.validate()?;
    if grid_size < 2 {
        return validation("grid_size must be at least 2");
    }
    let w: Vec<f64> = (0..grid_size)
        .map(|j| spec.mass(j as f64 / grid_size as f64, (j + 1) as f64 / grid_size as f64))
        .collect();
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > QUADRATURE_TOL {
        return Err(Error::Numeric {
            message: format!("discretized masses sum to {sum}"),
            iterations: 0,
        });
    }
    normalize(&w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap().weights(), &[0.5, 0.5]);
        assert_eq!(normalize(&[1.0, 0.0, 0.0]).unwrap().weights(), &[1.0, 0.0, 0.0]);
        let m = normalize(&[0.3, 0.45, 0.75]).unwrap();
        assert!(close(m.weights(), &[0.2, 0.3, 0.5], 1e-12));
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(normalize(&[0.0, 0.0]).is_err());
        assert!(normalize(&[1.0, -0.1]).is_err());
        assert!(normalize(&[1.0, f64::NAN]).is_err());
        assert!(normalize(&[f64::INFINITY, 1.0]).is_err());
        assert!(normalize(&[]).is_err());
    }

    #[test]
    fn finite_measure_rejects_unnormalized() {
        assert!(FiniteMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteMeasure::new(vec![0.7, 0.2, 0.1]).is_ok());
    }

    #[test]
    fn induced_vector_examples() {
        let half = Partition::half_split();
        let u = induced_vector(&DensitySpec::Uniform.into(), &half).unwrap();
        assert!(close(&u, &[0.5, 0.5], 1e-12));

        let f1 = DensitySpec::OnePlusSine { frequency: 1 };
        let v = induced_vector(&f1.into(), &half).unwrap();
        assert!(close(&v, &[0.5 + 1.0 / PI, 0.5 - 1.0 / PI], 1e-12));
        // quadrature cross-check of the closed form
        assert!((f1.mass_numeric(0.0, 0.5) - v[0]).abs() < 1e-9);

        let f2 = DensitySpec::OnePlusSine { frequency: 2 };
        let v = induced_vector(&f2.into(), &half).unwrap();
        assert!(close(&v, &[0.5, 0.5], 1e-12));
        assert!((f2.mass_numeric(0.0, 0.5) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn induced_vector_rejects_incompatible_partition() {
        let m: Law = FiniteMeasure::uniform(3).unwrap().into();
        assert!(induced_vector(&m, &Partition::half_split()).is_err());
        assert!(induced_vector(&m, &Partition::identity(2).unwrap()).is_err());
        let d: Law = DensitySpec::Uniform.into();
        assert!(induced_vector(&d, &Partition::identity(2).unwrap()).is_err());
    }

    #[test]
    fn atom_partition_merges_cells() {
        let p = Partition::new(vec![Cell::Atoms { atoms: vec![0, 2] }, Cell::Atoms { atoms: vec![1] }])
            .unwrap();
        let m: Law = FiniteMeasure::new(vec![0.2, 0.3, 0.5]).unwrap().into();
        assert!(close(&induced_vector(&m, &p).unwrap(), &[0.7, 0.3], 1e-12));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::identity(1).is_err());
        assert!(Partition::from_breakpoints(&[0.6, 0.4]).is_err());
        assert!(Partition::new(vec![
            Cell::Atoms { atoms: vec![0, 1] },
            Cell::Atoms { atoms: vec![1] }
        ])
        .is_err());
        assert!(Partition::new(vec![
            Cell::Interval { lo: 0.0, hi: 0.5 },
            Cell::Interval { lo: 0.6, hi: 1.0 }
        ])
        .is_err());
        assert!(Partition::new(vec![Cell::Interval { lo: 0.0, hi: 0.5 }, Cell::Atoms { atoms: vec![0] }])
            .is_err());
    }

    #[test]
    fn partition_json_round_trip() {
        let p: Partition = serde_json::from_str(r#"{"cells":[{"lo":0,"hi":0.25},{"lo":0.25,"hi":1}]}"#).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.cell_of_point(0.25), Some(0));
        assert_eq!(p.cell_of_point(0.26), Some(1));
        let q: Partition = serde_json::from_str(r#"{"cells":[{"atoms":[1]},{"atoms":[0,2]}]}"#).unwrap();
        assert_eq!(q.cell_of_atom(2), Some(1));
        assert_eq!(serde_json::from_str::<Partition>(&serde_json::to_string(&q).unwrap()).unwrap(), q);
    }

    #[test]
    fn discretize_examples() {
        let u = discretize(&DensitySpec::Uniform, 4).unwrap();
        assert!(close(u.weights(), &[0.25; 4], 1e-12));
        let pu = discretize(&DensitySpec::PuFamily { u: 0.5 }, 2).unwrap();
        assert!(close(pu.weights(), &[0.25, 0.75], 1e-12));
        let f1 = DensitySpec::OnePlusSine { frequency: 1 };
        let d = discretize(&f1, 2).unwrap();
        let iv = induced_vector(&f1.into(), &Partition::half_split()).unwrap();
        assert!(close(d.weights(), &iv, 1e-12));
    }

    #[test]
    fn discretize_rejects_bad_specs() {
        assert!(discretize(&DensitySpec::Uniform, 1).is_err());
        assert!(discretize(&DensitySpec::PuFamily { u: 1.0 }, 4).is_err());
        assert!(discretize(&DensitySpec::OnePlusSine { frequency: 0 }, 4).is_err());
        assert!(discretize(&DensitySpec::CesaroMixture { order: 0 }, 4).is_err());
    }

    #[test]
    fn closed_form_masses_match_quadrature() {
        let specs = [
            DensitySpec::OnePlusSine { frequency: 3 },
            DensitySpec::CesaroMixture { order: 5 },
            DensitySpec::PuFamily { u: 0.3 },
        ];
        for s in specs {
            for (a, b) in [(0.0, 0.13), (0.13, 0.5), (0.41, 0.97), (0.0, 1.0)] {
                assert!((s.mass(a, b) - s.mass_numeric(a, b)).abs() < 1e-9, "{s:?} ({a},{b})");
            }
        }
    }

    #[test]
    fn high_frequency_sines_approach_uniform() {
        let p = Partition::from_breakpoints(&[0.1, 0.37, 0.8]).unwrap();
        let u = induced_vector(&DensitySpec::Uniform.into(), &p).unwrap();
        for i in [8u32, 16, 32] {
            let v = induced_vector(&DensitySpec::OnePlusSine { frequency: i }.into(), &p).unwrap();
            for (a, b) in v.iter().zip(&u) {
                assert!((a - b).abs() <= 1.0 / (PI * i as f64));
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let specs = [
            DensitySpec::Uniform,
            DensitySpec::OnePlusSine { frequency: 4 },
            DensitySpec::CesaroMixture { order: 3 },
            DensitySpec::PuFamily { u: 0.6 },
        ];
        for s in specs {
            for p in [0.0, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0] {
                assert!((s.cdf(s.quantile(p)) - p).abs() < 1e-12, "{s:?} at {p}");
            }
        }
    }

    #[test]
    fn density_spec_json_shape() {
        let s: DensitySpec = serde_json::from_str(r#"{"kind":"one_plus_sine","frequency":2}"#).unwrap();
        assert_eq!(s, DensitySpec::OnePlusSine { frequency: 2 });
        let s: DensitySpec = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(s, DensitySpec::Uniform);
    }

    fn measure(k: usize) -> impl Strategy<Value = FiniteMeasure> {
        prop::collection::vec(0.01f64..1.0, k).prop_map(|w| normalize(&w).unwrap())
    }

    proptest! {
        #[test]
        fn induced_vector_is_affine(p in measure(5), q in measure(5), lambda in 0.0f64..=1.0) {
            let part = Partition::new(vec![
                Cell::Atoms { atoms: vec![0, 3] },
                Cell::Atoms { atoms: vec![1] },
                Cell::Atoms { atoms: vec![2, 4] },
            ]).unwrap();
            let mix = FiniteMeasure::mixture(&[p.clone(), q.clone()], &[lambda, 1.0 - lambda]).unwrap();
            let lhs = induced_vector(&mix.into(), &part).unwrap();
            let vp = induced_vector(&p.into(), &part).unwrap();
            let vq = induced_vector(&q.into(), &part).unwrap();
            for j in 0..3 {
                prop_assert!((lhs[j] - (lambda * vp[j] + (1.0 - lambda) * vq[j])).abs() < 1e-12);
            }
        }

        #[test]
        fn discretize_then_grid_induce_is_identity(freq in 1u32..12, grid in 2usize..40) {
            let spec = DensitySpec::OnePlusSine { frequency: freq };
            let d = discretize(&spec, grid).unwrap();
            let v = induced_vector(&spec.into(), &Partition::equal_intervals(grid).unwrap()).unwrap();
            prop_assert!(close(d.weights(), &v, 1e-9));
            let sum: f64 = d.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
