//! Dense two-phase simplex for small linear programs.
//!
//! Solves
//!
//! ```text
//! minimize    c·x
//! subject to  A_ub x <= b_ub
//!             A_eq x  = b_eq
//!             x >= 0
//! ```
//!
//! with a full tableau. Entering columns follow Dantzig's rule (most negative
//! reduced cost); after a run of degenerate pivots the solver switches to
//! Bland's rule, which cannot cycle, until the objective moves again. The
//! hull-distance programs have many zero right-hand sides and are heavily
//! degenerate, so both halves matter.

use crate::error::{validation, Error, Result};

const PIVOT_EPS: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-12;
/// Tableau entries below this magnitude are flushed to zero after a pivot.
const DROP_TOL: f64 = 1e-14;
const MAX_ITERATIONS: usize = 100_000;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ub_rows: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Total simplex pivots over both phases.
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ub_rows.push(row);
        self.ub_rhs.push(rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.num_vars();
        if n == 0 {
            return validation("linear program has no variables");
        }
        if self.ub_rows.iter().chain(&self.eq_rows).any(|r| r.len() != n) {
            return validation("constraint row length differs from variable count");
        }
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// The rows as built, before any pivot; used to rebuild `rows` from the
    /// current basis when rounding error has accumulated.
    original: Vec<Vec<f64>>,
    basis: Vec<usize>,
    since_refresh: usize,
    n_orig: usize,
    n_slack: usize,
    n_art: usize,
    iterations: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.n_orig + self.n_slack + self.n_art
    }

    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let n_slack = lp.ub_rows.len();
        // Every row with a negative rhs (after the slack is placed) and every
        // equality row needs an artificial variable.
        let needs_art: Vec<bool> = lp
            .ub_rhs
            .iter()
            .map(|b| *b < 0.0)
            .chain(lp.eq_rows.iter().map(|_| true))
            .collect();
        let n_art = needs_art.iter().filter(|x| **x).count();
        let width = n + n_slack + n_art;

        let mut rows = Vec::with_capacity(needs_art.len());
        let mut basis = Vec::with_capacity(needs_art.len());
        let mut art = 0;
        let all_rows = lp
            .ub_rows
            .iter()
            .zip(&lp.ub_rhs)
            .chain(lp.eq_rows.iter().zip(&lp.eq_rhs));
        for (i, (coeffs, &rhs)) in all_rows.enumerate() {
            let mut row = vec![0.0; width + 1];
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            for (dst, a) in row.iter_mut().zip(coeffs) {
                *dst = sign * a;
            }
            if i < n_slack {
                row[n + i] = sign;
            }
            row[width] = sign * rhs;
            if needs_art[i] {
                row[n + n_slack + art] = 1.0;
                basis.push(n + n_slack + art);
                art += 1;
            } else {
                basis.push(n + i);
            }
            rows.push(row);
        }
        Self {
            original: rows.clone(),
            rows,
            basis,
            since_refresh: 0,
            n_orig: n,
            n_slack,
            n_art,
            iterations: 0,
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let width = self.width();
        if self.n_art > 0 {
            let mut cost = vec![0.0; width];
            for c in cost.iter_mut().skip(self.n_orig + self.n_slack) {
                *c = 1.0;
            }
            let phase1 = self.optimize(&cost, width)?;
            if phase1 > FEASIBILITY_TOL {
                return Err(Error::Numeric {
                    message: format!("linear program infeasible (phase-1 residual {phase1:e})"),
                    iterations: self.iterations,
                });
            }
            self.expel_artificials();
        }
        let mut cost = vec![0.0; width];
        cost[..self.n_orig].copy_from_slice(&lp.objective);
        let value = self.optimize(&cost, self.n_orig + self.n_slack)?;
        let mut x = vec![0.0; self.n_orig];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_orig {
                x[b] = row[width].max(0.0);
            }
        }
        Ok(LpSolution {
            x,
            objective: value,
            iterations: self.iterations,
        })
    }

    /// Minimizes `cost` over the current basis, allowing only columns below
    /// `eligible` to enter. Returns the optimal objective.
    fn optimize(&mut self, cost: &[f64], eligible: usize) -> Result<f64> {
        let width = self.width();
        let mut streak = 0;
        loop {
            let reduced = self.reduced_costs(cost);
            let candidate = if streak >= DEGENERATE_STREAK {
                (0..eligible).find(|&j| reduced[j] < -PIVOT_EPS)
            } else {
                (0..eligible)
                    .filter(|&j| reduced[j] < -PIVOT_EPS)
                    .min_by(|&a, &b| reduced[a].total_cmp(&reduced[b]))
            };
            let Some(enter) = candidate else {
                if self.since_refresh > 0 && self.refresh() {
                    // Confirm optimality on the rebuilt tableau.
                    continue;
                }
                let value = self
                    .rows
                    .iter()
                    .zip(&self.basis)
                    .map(|(r, &b)| cost[b] * r[width])
                    .sum();
                return Ok(value);
            };
            // Two-pass ratio test: find the minimum ratio, then among rows
            // within tolerance of it take the largest pivot element (or, in
            // Bland mode, the smallest basis index).
            let bland = streak >= DEGENERATE_STREAK;
            let ratio_of = |row: &Vec<f64>| row[width].max(0.0) / row[enter];
            let min_ratio = self
                .rows
                .iter()
                .filter(|row| row[enter] > PIVOT_EPS)
                .map(ratio_of)
                .fold(f64::INFINITY, f64::min);
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a <= PIVOT_EPS || ratio_of(row) > min_ratio + RATIO_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((li, _)) if bland => self.basis[i] < self.basis[li],
                    Some((li, _)) => a > self.rows[li][enter],
                };
                if better {
                    leave = Some((i, ratio_of(row)));
                }
            }
            let Some((leave, ratio)) = leave else {
                return Err(Error::Numeric {
                    message: "linear program unbounded".into(),
                    iterations: self.iterations,
                });
            };
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(leave, enter);
            if self.since_refresh >= self.rows.len().max(50) {
                self.refresh();
            }
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::Numeric {
                    message: "simplex iteration limit reached".into(),
                    iterations: self.iterations,
                });
            }
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.iterations += 1;
        self.since_refresh += 1;
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    }
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Recomputes the tableau as `B^{-1}·original` for the current basis `B`
    /// by Gaussian elimination with partial pivoting. Returns false (leaving
    /// the tableau untouched) if `B` is numerically singular.
    fn refresh(&mut self) -> bool {
        let m = self.rows.len();
        let w = self.width() + 1;
        let mut aug: Vec<Vec<f64>> = self
            .original
            .iter()
            .map(|row| {
                let mut a: Vec<f64> = self.basis.iter().map(|&b| row[b]).collect();
                a.extend_from_slice(row);
                a
            })
            .collect();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .expect("nonempty range");
            if aug[piv][col].abs() < PIVOT_EPS {
                return false;
            }
            aug.swap(col, piv);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            let pivot_row = aug[col].clone();
            for (i, row) in aug.iter_mut().enumerate() {
                let f = row[col];
                if i != col && f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                        *v -= f * pv;
                    }
                }
            }
        }
        for (dst, src) in self.rows.iter_mut().zip(&aug) {
            dst.copy_from_slice(&src[m..m + w]);
            for v in dst.iter_mut() {
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                }
            }
        }
        self.since_refresh = 0;
        true
    }

    /// After phase 1, pivots basic artificials (at level zero) out of the
    /// basis, dropping rows that turn out to be redundant.
    fn expel_artificials(&mut self) {
        let first_art = self.n_orig + self.n_slack;
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= first_art {
                let col = (0..first_art).find(|&j| self.rows[r][j].abs() > PIVOT_EPS);
                match col {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.rows.remove(r);
                        self.original.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-3.0, -5.0];
        lp.add_le(vec![1.0, 0.0], 4.0);
        lp.add_le(vec![0.0, 2.0], 12.0);
        lp.add_le(vec![3.0, 2.0], 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y s.t. x + y = 1, -x <= -0.25  -> 1, x >= 0.25
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_le(vec![-1.0, 0.0], -0.25);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_eq(vec![1.0], 1.0);
        lp.add_le(vec![1.0], 0.5);
        assert!(matches!(lp.solve(), Err(Error::Numeric { .. })));
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_le(vec![0.0, 1.0], 1.0);
        assert!(matches!(lp.solve(), Err(Error::Numeric { .. })));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let s = lp.solve().unwrap();
        assert!(s.objective.abs() < 1e-12);
        assert!((s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut lp = LinearProgram::new(2);
        lp.add_le(vec![1.0], 1.0);
        assert!(matches!(lp.solve(), Err(Error::Validation(_))));
    }
}
