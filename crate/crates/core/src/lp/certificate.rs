//! Optimality certificate checks for solutions returned by the simplex.
//!
//! Reduced costs are recomputed from the row multipliers, so a corrupted
//! dual vector shows up even when the stored reduced costs look fine.

use super::{LinearProgram, LpSolution, Sense};

const PRIMAL_TOL: f64 = 1e-8;
const SLACKNESS_TOL: f64 = 1e-7;
const GAP_TOL: f64 = 1e-7;
const SIGN_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// A row activity outside its sense by more than 1e-8.
    RowFeasibility,
    /// A variable outside its bounds by more than 1e-8.
    BoundFeasibility,
    /// A row multiplier or reduced cost with the wrong sign.
    DualSign,
    RowSlackness,
    BoundSlackness,
    /// Stored reduced cost disagrees with `c - A^T y`.
    ReducedCost,
    DualityGap,
    Dimension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateViolation {
    pub kind: CertificateKind,
    /// Row or column index, when the violation is local.
    pub index: Option<usize>,
    /// Row or variable label, empty for global violations.
    pub label: String,
    pub magnitude: f64,
}

impl std::fmt::Display for CertificateViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.index {
            Some(i) => write!(f, "{:?} at {} ({}): {:.3e}", self.kind, i, self.label, self.magnitude),
            None => write!(f, "{:?}: {:.3e}", self.kind, self.magnitude),
        }
    }
}

/// Checks primal feasibility, dual signs, complementary slackness and the
/// duality gap of an optimal solution. Returns every violation found.
pub fn check_certificate(lp: &LinearProgram, sol: &LpSolution) -> Vec<CertificateViolation> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let mut out = Vec::new();
    if sol.x.len() != n || sol.duals.len() != m || sol.reduced_costs.len() != n {
        out.push(CertificateViolation {
            kind: CertificateKind::Dimension,
            index: None,
            label: String::new(),
            magnitude: f64::NAN,
        });
        return out;
    }
    let x = &sol.x;
    let y = &sol.duals;
    let mut local = |kind, index: usize, label: &str, magnitude: f64| {
        out.push(CertificateViolation {
            kind,
            index: Some(index),
            label: label.to_string(),
            magnitude,
        });
    };

    let mut d = lp.objective().to_vec();
    let mut dual_obj = 0.0;
    for (i, row) in lp.rows().iter().enumerate() {
        let act = row.activity(x);
        let resid = act - row.rhs;
        let infeas = match row.sense {
            Sense::Le => resid.max(0.0),
            Sense::Ge => (-resid).max(0.0),
            Sense::Eq => resid.abs(),
        };
        if infeas > PRIMAL_TOL {
            local(CertificateKind::RowFeasibility, i, &row.label, infeas);
        }
        let wrong_sign = match row.sense {
            Sense::Le => y[i].max(0.0),
            Sense::Ge => (-y[i]).max(0.0),
            Sense::Eq => 0.0,
        };
        if wrong_sign > SIGN_TOL {
            local(CertificateKind::DualSign, i, &row.label, wrong_sign);
        }
        if row.sense != Sense::Eq {
            let prod = (y[i] * resid).abs();
            if prod > SLACKNESS_TOL {
                local(CertificateKind::RowSlackness, i, &row.label, prod);
            }
        }
        dual_obj += y[i] * row.rhs;
        for &(j, a) in &row.coeffs {
            d[j] -= a * y[i];
        }
    }

    for j in 0..n {
        let (l, u) = (lp.lower()[j], lp.upper()[j]);
        let label = lp.var_label(j);
        let infeas = (l - x[j]).max(x[j] - u).max(0.0);
        if infeas > PRIMAL_TOL {
            local(CertificateKind::BoundFeasibility, j, label, infeas);
        }
        let stored = sol.reduced_costs[j];
        if (stored - d[j]).abs() > SLACKNESS_TOL * (1.0 + d[j].abs()) {
            local(CertificateKind::ReducedCost, j, label, (stored - d[j]).abs());
        }
        // d_j > 0 needs a finite lower bound to rest on, d_j < 0 an upper one.
        let bound = if d[j] > 0.0 && l.is_finite() {
            l
        } else if d[j] < 0.0 && u.is_finite() {
            u
        } else {
            if d[j].abs() > SIGN_TOL {
                local(CertificateKind::DualSign, j, label, d[j].abs());
            }
            x[j]
        };
        let prod = (d[j] * (x[j] - bound)).abs();
        if prod > SLACKNESS_TOL {
            local(CertificateKind::BoundSlackness, j, label, prod);
        }
        dual_obj += d[j] * bound;
    }

    let primal_obj = lp.objective_value(x);
    let gap = (primal_obj - dual_obj).abs();
    if gap > GAP_TOL * (1.0 + primal_obj.abs()) {
        out.push(CertificateViolation {
            kind: CertificateKind::DualityGap,
            index: None,
            label: String::new(),
            magnitude: gap,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;

    fn small() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 4.0, "x");
        let y = lp.add_var(2.0, 0.0, 4.0, "y");
        lp.add_row([(x, 1.0), (y, 1.0)], Sense::Ge, 5.0, "cover");
        lp.add_row([(x, 1.0), (y, -1.0)], Sense::Le, 5.0, "spread");
        lp
    }

    #[test]
    fn solver_output_passes() {
        let lp = small();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(check_certificate(&lp, &sol).is_empty());
    }

    #[test]
    fn corrupted_dual_names_the_row() {
        let lp = small();
        let mut sol = lp.solve().unwrap();
        sol.duals[1] = -0.5;
        let v = check_certificate(&lp, &sol);
        assert!(v
            .iter()
            .any(|e| e.kind == CertificateKind::RowSlackness && e.label == "spread"));
    }
}
