use crate::cuts::CutStore;
use crate::model::{DhdProblem, InitialState};

use super::{check_hd_reformulation, extensive_optimum, ExactValue, HdCheck, OracleError, DEFAULT_NONZERO_CAP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub nonzero_cap: usize,
    /// Relative gap limit: `|LB - opt| <= gap_tol (1 + |opt|)`.
    pub gap_tol: f64,
    /// A cut may exceed the exact value by at most this much.
    pub cut_tol: f64,
    pub hd_tol: f64,
    /// Target number of grid points per `(t, i)`.
    pub grid_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            nonzero_cap: DEFAULT_NONZERO_CAP,
            gap_tol: 1e-5,
            cut_tol: 1e-6,
            hd_tol: 1e-5,
            grid_points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutViolation {
    pub t: usize,
    pub i: usize,
    pub x: Vec<f64>,
    pub cut_index: usize,
    pub cut_value: f64,
    pub exact_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub lower_bound: f64,
    pub oracle_optimum: f64,
    pub gap: f64,
    pub gap_ok: bool,
    pub grid_points_checked: usize,
    /// Grid points outside the domain of the exact cost-to-go.
    pub grid_points_infeasible: usize,
    pub cut_pairs_checked: usize,
    pub violations: Vec<CutViolation>,
    pub hd: HdCheck,
    pub hd_ok: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.gap_ok && self.violations.is_empty() && self.hd_ok
    }
}

/// Regular grid over the state box with about `points` points. Without a box
/// the grid spans the cut source states (or the initial state) padded by one.
pub fn state_grid(p: &DhdProblem, store: &CutStore, t: usize, i: usize, points: usize) -> Vec<Vec<f64>> {
    let n = p.dims.state_dim;
    let ranges: Vec<(f64, f64)> = match &p.state_bounds {
        Some(b) => b.clone(),
        None => {
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            fn widen(lo: &mut [f64], hi: &mut [f64], x: &[f64]) {
                for k in 0..lo.len() {
                    lo[k] = lo[k].min(x[k]);
                    hi[k] = hi[k].max(x[k]);
                }
            }
            for c in store.cuts(t, i).unwrap_or(&[]) {
                if let Some(s) = &c.source_state {
                    widen(&mut lo, &mut hi, s);
                }
            }
            if n > 0 && lo[0] > hi[0] {
                let origin = vec![0.0; n];
                let x0 = match &p.initial_state {
                    InitialState::Fixed(x0) => x0,
                    InitialState::Free => &origin,
                };
                widen(&mut lo, &mut hi, x0);
            }
            lo.iter().zip(&hi).map(|(&l, &h)| (l - 1.0, h + 1.0)).collect()
        }
    };
    let per_axis = ((points.max(1) as f64).powf(1.0 / n.max(1) as f64) + 1e-9)
        .floor()
        .max(1.0) as usize;
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if per_axis == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..per_axis)
                .map(|s| lo + (hi - lo) * s as f64 / (per_axis - 1) as f64)
                .collect()
        }
    };
    let mut grid = vec![Vec::with_capacity(n)];
    for &range in &ranges {
        let values = axis(range);
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut x = prefix.clone();
                    x.push(v);
                    x
                })
            })
            .collect();
    }
    grid
}

/// Compares a solved cut store against the exact solution: the lower bound
/// gap, every stored cut on a grid at each `(t, i)`, and the hazard-decision
/// reformulation.
pub fn verify(
    p: &DhdProblem,
    store: &CutStore,
    lower_bound: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, OracleError> {
    let opt = extensive_optimum(p, opts.nonzero_cap)?;
    let gap = (lower_bound - opt).abs();
    let mut report = VerificationReport {
        lower_bound,
        oracle_optimum: opt,
        gap,
        gap_ok: gap <= opts.gap_tol * (1.0 + opt.abs()),
        grid_points_checked: 0,
        grid_points_infeasible: 0,
        cut_pairs_checked: 0,
        violations: Vec::new(),
        hd: HdCheck {
            dhd_optimum: opt,
            hd_optimum: f64::NAN,
            difference: f64::NAN,
        },
        hd_ok: false,
    };
    for t in 0..p.horizon() {
        for i in 0..p.num_markov(t) {
            let cuts = store.cuts(t, i)?;
            let mut exact = ExactValue::new(p, t, i, opts.nonzero_cap)?;
            for x in state_grid(p, store, t, i, opts.grid_points) {
                report.grid_points_checked += 1;
                let value = match exact.eval(&x) {
                    Ok((v, _)) => v,
                    Err(OracleError::Infeasible { .. }) => {
                        report.grid_points_infeasible += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                for (k, cut) in cuts.iter().enumerate() {
                    report.cut_pairs_checked += 1;
                    let cv = cut.eval(&x);
                    if cv > value + opts.cut_tol {
                        report.violations.push(CutViolation {
                            t,
                            i,
                            x: x.clone(),
                            cut_index: k,
                            cut_value: cv,
                            exact_value: value,
                        });
                    }
                }
            }
        }
    }
    report.hd = check_hd_reformulation(p, opts.nonzero_cap)?;
    report.hd_ok = report.hd.difference <= opts.hd_tol;
    Ok(report)
}
