//! Bounded-variable linear programming.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c·x
//! subject to  a_i·x  (<=, =, >=)  b_i      for every row i
//!             l <= x <= u                  (infinite bounds allowed)
//! ```
//!
//! and solved by a revised simplex method working on the row-activity form
//! `A x - s = 0` with bounded logicals `s`. Dual multipliers follow the
//! sensitivity convention `y_i = ∂(optimal value)/∂b_i`, so a binding `>=`
//! row has `y_i >= 0`, a binding `<=` row has `y_i <= 0`.

pub mod brute_force;
mod certificate;
mod mps;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use certificate::{check_certificate, CertificateKind, CertificateViolation};
pub use mps::write_mps;
pub use simplex::Simplex;

/// Constraint sense of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Sense {
    /// Bounds `[lo, hi]` on the row activity implied by this sense and `rhs`.
    pub fn activity_bounds(self, rhs: f64) -> (f64, f64) {
        match self {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Eq => (rhs, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A linear program in row form with variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_labels: Vec<String>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64, label: impl Into<String>) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_labels.push(label.into());
        self.objective.len() - 1
    }

    /// Adds a row and returns its index. Zero coefficients are dropped and
    /// repeated column indices are summed.
    pub fn add_row<I>(&mut self, coeffs: I, sense: Sense, rhs: f64, label: impl Into<String>) -> usize
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, a) in coeffs {
            if a == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(k, _)| *k == j) {
                Some(entry) => entry.1 += a,
                None => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            coeffs: merged,
            sense,
            rhs,
            label: label.into(),
        });
        self.rows.len() - 1
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.rows[row].rhs = rhs;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var_label(&self, j: usize) -> &str {
        &self.var_labels[j]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Structural checks: index ranges, finiteness and bound order.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !self.objective[j].is_finite() {
                return Err(LpError::NonFinite(format!("objective[{j}]")));
            }
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(LpError::InvalidBounds {
                    var: j,
                    lower: l,
                    upper: u,
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs[{i}]")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::DimensionMismatch(format!(
                        "row {i} references column {j} but the program has {n} variables"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}, column {j}")));
                }
            }
        }
        Ok(())
    }

    /// Solves with default options.
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Simplex::new(self, SimplexOptions::default())?.solve()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `c·x` at the returned point (for `Infeasible`, the point reached by phase 1).
    pub objective: f64,
    pub x: Vec<f64>,
    /// One multiplier per row.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Sum of bound violations at the end of phase 1; zero unless `Infeasible`.
    pub infeasibility: f64,
    /// Improving direction of `x` when `Unbounded`.
    pub ray: Option<Vec<f64>>,
    pub pivots: usize,
}

/// Numerical settings of the simplex method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Bound violation accepted on basic variables.
    pub feasibility_tol: f64,
    /// Reduced-cost magnitude treated as zero.
    pub optimality_tol: f64,
    /// Smallest admissible pivot element.
    pub pivot_tol: f64,
    /// Distance at which variables without a finite bound are parked
    /// during the dual phase.
    pub artificial_bound: f64,
    /// Eta-file length that triggers a fresh factorization.
    pub refactor_interval: usize,
    /// Hard cap on pivots; `None` derives one from the problem size.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            artificial_bound: 1e6,
            refactor_interval: 64,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds on variable {var}: [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite data at {0}")]
    NonFinite(String),
    #[error("pivot limit of {0} reached without convergence")]
    PivotLimit(usize),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_row_merges_repeated_columns() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0, "x");
        let y = lp.add_var(1.0, 0.0, 1.0, "y");
        lp.add_row([(x, 1.0), (y, 0.0), (x, 2.0)], Sense::Le, 1.0, "r");
        assert_eq!(lp.rows()[0].coeffs, vec![(x, 3.0)]);
    }

    #[test]
    fn check_rejects_out_of_range_column() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 1.0, "x");
        lp.add_row([(3, 1.0)], Sense::Le, 1.0, "r");
        assert!(matches!(lp.check(), Err(LpError::DimensionMismatch(_))));
    }

    #[test]
    fn check_rejects_crossed_bounds() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 2.0, 1.0, "x");
        assert!(matches!(lp.check(), Err(LpError::InvalidBounds { var: 0, .. })));
    }
}
