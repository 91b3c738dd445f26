//! Two-stage stage subproblems.
//!
//! At `(t, i, X̂)` the first stage picks `U^b`; each successor scenario
//! `s = (j, e)` gets its own copy of `(U^a_s, X'_s, phi_s)` where `phi_s`
//! is bounded below by the cuts stored at `(t+1, j)`. The state enters
//! through a copy `X̃` pinned by one anchor row per coordinate, so the
//! anchor-row duals are a subgradient of the optimal value in `X̂`.

use thiserror::Error;

use crate::cuts::{CutError, CutStore};
use crate::lp::{LinearProgram, LpError, LpStatus, Sense};
use crate::model::{dot, scenario_weights, DhdProblem, ModelError, StageRealization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error("stage infeasible at (t={t}, i={i}, X={x:?})")]
    Infeasible { t: usize, i: usize, x: Vec<f64> },
    #[error("stage unbounded at (t={t}, i={i}, X={x:?}): linearity/boundedness condition violated")]
    Unbounded { t: usize, i: usize, x: Vec<f64> },
    #[error("LP failure at (t={t}, i={i}): {source}")]
    Lp { t: usize, i: usize, source: LpError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("scenario (j={j}, e={e}) has zero probability from state {i} at stage {t}")]
    UnknownScenario { t: usize, i: usize, j: usize, e: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageOptions {
    /// When set, every row that can cause infeasibility gets elastic slacks
    /// priced at this value per unit (times the scenario probability).
    pub feasibility_penalty: Option<f64>,
}

/// Column indices of one scenario block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBlock {
    pub j: usize,
    pub e: usize,
    pub prob: f64,
    pub u_a: Vec<usize>,
    pub x_next: Vec<usize>,
    pub phi: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageLp {
    pub lp: LinearProgram,
    pub x_tilde: Vec<usize>,
    pub u_b: Vec<usize>,
    pub anchor_rows: Vec<usize>,
    pub scenarios: Vec<ScenarioBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecourse {
    pub j: usize,
    pub e: usize,
    pub prob: f64,
    pub u_a: Vec<f64>,
    pub x_next: Vec<f64>,
    /// Value of `phi_s`, the cut envelope at `x_next`.
    pub epi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub value: f64,
    pub u_b: Vec<f64>,
    pub recourse: Vec<ScenarioRecourse>,
    /// Anchor-row duals.
    pub subgradient: Vec<f64>,
    pub status: LpStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recourse {
    pub u_a: Vec<f64>,
    pub x_next: Vec<f64>,
    /// `cost_a·u_a + phi`.
    pub value: f64,
    /// `cost_x·X̂ + cost_b·u_b + cost_a·u_a` of the realized transition.
    pub stage_cost: f64,
    pub epi: f64,
}

/// Intersection of the `U^b` bounds of all successor realizations.
fn first_stage_bounds(reals: &[&StageRealization], mb: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(f64::NEG_INFINITY, f64::INFINITY); mb];
    for r in reals {
        for (k, &(lo, hi)) in r.bounds_b.iter().enumerate() {
            b[k].0 = b[k].0.max(lo);
            b[k].1 = b[k].1.min(hi);
        }
    }
    b
}

fn add_elastic(lp: &mut LinearProgram, coeffs: &mut Vec<(usize, f64)>, sense: Sense, price: Option<f64>, label: &str) {
    let Some(price) = price else { return };
    if sense != Sense::Le {
        let v = lp.add_var(price, 0.0, f64::INFINITY, format!("{label}.up"));
        coeffs.push((v, 1.0));
    }
    if sense != Sense::Ge {
        let v = lp.add_var(price, 0.0, f64::INFINITY, format!("{label}.down"));
        coeffs.push((v, -1.0));
    }
}

/// Builds the stage LP at `(t, i, X̂)`.
pub fn build_two_stage(
    p: &DhdProblem,
    store: &CutStore,
    t: usize,
    i: usize,
    x_hat: &[f64],
    opts: &StageOptions,
) -> Result<StageLp, StageError> {
    let n = p.dims.state_dim;
    let mb = p.dims.control_b_dim;
    let ma = p.dims.control_a_dim;
    let weights = scenario_weights(p, t, i)?;
    let reals: Vec<&StageRealization> = weights.iter().map(|&((j, e), _)| p.stage_data(t, i, j, e)).collect();
    let terminal_next = t + 1 == p.horizon();
    let state_box = p.state_box();

    let mut lp = LinearProgram::new();
    let mut cost_x = vec![0.0; n];
    let mut cost_b = vec![0.0; mb];
    for (&(_, w), r) in weights.iter().zip(&reals) {
        for k in 0..n {
            cost_x[k] += w * r.cost_x[k];
        }
        for k in 0..mb {
            cost_b[k] += w * r.cost_b[k];
        }
    }
    let x_tilde: Vec<usize> = (0..n)
        .map(|k| lp.add_var(cost_x[k], f64::NEG_INFINITY, f64::INFINITY, format!("xt{k}")))
        .collect();
    let ub_bounds = first_stage_bounds(&reals, mb);
    let u_b: Vec<usize> = (0..mb)
        .map(|k| lp.add_var(cost_b[k], ub_bounds[k].0, ub_bounds[k].1, format!("ub{k}")))
        .collect();
    let anchor_rows: Vec<usize> = (0..n)
        .map(|k| lp.add_row([(x_tilde[k], 1.0)], Sense::Eq, x_hat[k], format!("anchor{k}")))
        .collect();

    let penalty = opts.feasibility_penalty;
    let mut scenarios = Vec::with_capacity(weights.len());
    for (&((j, e), w), r) in weights.iter().zip(&reals) {
        let tag = format!("s{j}.{e}");
        let u_a: Vec<usize> = (0..ma)
            .map(|k| {
                lp.add_var(
                    w * r.cost_a[k],
                    r.bounds_a[k].0,
                    r.bounds_a[k].1,
                    format!("{tag}.ua{k}"),
                )
            })
            .collect();
        let x_next: Vec<usize> = (0..n)
            .map(|k| lp.add_var(0.0, state_box[k].0, state_box[k].1, format!("{tag}.x{k}")))
            .collect();
        let phi = lp.add_var(w, f64::NEG_INFINITY, f64::INFINITY, format!("{tag}.phi"));
        let price = penalty.map(|c| c * w);

        for row in 0..n {
            let mut coeffs = vec![(x_next[row], 1.0)];
            coeffs.extend((0..n).map(|c| (x_tilde[c], -r.a.get(row, c))));
            coeffs.extend((0..mb).map(|c| (u_b[c], -r.bb.get(row, c))));
            coeffs.extend((0..ma).map(|c| (u_a[c], -r.ba.get(row, c))));
            let label = format!("{tag}.dyn{row}");
            add_elastic(&mut lp, &mut coeffs, Sense::Eq, price, &label);
            lp.add_row(coeffs, Sense::Eq, r.w[row], label);
        }
        for (q, row) in r.rows.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x_tilde[c], row.ax[c])).collect();
            coeffs.extend((0..mb).map(|c| (u_b[c], row.ab[c])));
            coeffs.extend((0..ma).map(|c| (u_a[c], row.aa[c])));
            let label = format!("{tag}.row{q}");
            add_elastic(&mut lp, &mut coeffs, row.sense, price, &label);
            lp.add_row(coeffs, row.sense, row.rhs, label);
        }
        for (q, cut) in store.cuts(t + 1, j)?.iter().enumerate() {
            let mut coeffs = vec![(phi, 1.0)];
            coeffs.extend((0..n).map(|c| (x_next[c], -cut.beta[c])));
            lp.add_row(coeffs, Sense::Ge, cut.alpha, format!("{tag}.cut{q}"));
        }
        if terminal_next {
            for (q, row) in store.terminal_rows(j).iter().enumerate() {
                let mut coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x_next[c], row.ax[c])).collect();
                let label = format!("{tag}.term{q}");
                add_elastic(&mut lp, &mut coeffs, row.sense, price, &label);
                lp.add_row(coeffs, row.sense, row.rhs, label);
            }
        }
        scenarios.push(ScenarioBlock {
            j,
            e,
            prob: w,
            u_a,
            x_next,
            phi,
        });
    }

    Ok(StageLp {
        lp,
        x_tilde,
        u_b,
        anchor_rows,
        scenarios,
    })
}

/// Solves the stage problem at `(t, i, X̂)`.
pub fn solve_stage(
    p: &DhdProblem,
    store: &CutStore,
    t: usize,
    i: usize,
    x_hat: &[f64],
    opts: &StageOptions,
) -> Result<StageSolution, StageError> {
    let built = build_two_stage(p, store, t, i, x_hat, opts)?;
    let sol = built.lp.solve().map_err(|source| StageError::Lp { t, i, source })?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(StageError::Infeasible {
                t,
                i,
                x: x_hat.to_vec(),
            });
        }
        LpStatus::Unbounded => {
            return Err(StageError::Unbounded {
                t,
                i,
                x: x_hat.to_vec(),
            });
        }
    }
    let u_b: Vec<f64> = built.u_b.iter().map(|&k| sol.x[k]).collect();
    let recourse = built
        .scenarios
        .iter()
        .map(|s| {
            let u_a: Vec<f64> = s.u_a.iter().map(|&k| sol.x[k]).collect();
            let r = p.stage_data(t, i, s.j, s.e);
            ScenarioRecourse {
                j: s.j,
                e: s.e,
                prob: s.prob,
                x_next: r.next_state(x_hat, &u_b, &u_a),
                u_a,
                epi: sol.x[s.phi],
            }
        })
        .collect();
    Ok(StageSolution {
        value: sol.objective,
        u_b,
        recourse,
        subgradient: built.anchor_rows.iter().map(|&r| sol.duals[r]).collect(),
        status: sol.status,
    })
}

/// Solves the single-scenario problem for the realized `(j, e)` with `X̂`
/// and `u_b` fixed.
#[allow(clippy::too_many_arguments)]
pub fn solve_recourse(
    p: &DhdProblem,
    store: &CutStore,
    t: usize,
    i: usize,
    (j, e): (usize, usize),
    x_hat: &[f64],
    u_b: &[f64],
    opts: &StageOptions,
) -> Result<Recourse, StageError> {
    let n = p.dims.state_dim;
    let ma = p.dims.control_a_dim;
    if t >= p.horizon()
        || i >= p.num_markov(t)
        || j >= p.num_markov(t + 1)
        || e >= p.noise.support_sizes[t]
        || p.transition(t, i, j) * p.noise_prob(t, e) <= 0.0
    {
        return Err(StageError::UnknownScenario { t, i, j, e });
    }
    let r = p.stage_data(t, i, j, e);
    let state_box = p.state_box();
    let price = opts.feasibility_penalty;

    let mut lp = LinearProgram::new();
    let u_a: Vec<usize> = (0..ma)
        .map(|k| lp.add_var(r.cost_a[k], r.bounds_a[k].0, r.bounds_a[k].1, format!("ua{k}")))
        .collect();
    let x_next: Vec<usize> = (0..n)
        .map(|k| lp.add_var(0.0, state_box[k].0, state_box[k].1, format!("x{k}")))
        .collect();
    let phi = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY, "phi");

    for row in 0..n {
        let mut coeffs = vec![(x_next[row], 1.0)];
        coeffs.extend((0..ma).map(|c| (u_a[c], -r.ba.get(row, c))));
        let rhs = dot(r.a.row(row), x_hat) + dot(r.bb.row(row), u_b) + r.w[row];
        let label = format!("dyn{row}");
        add_elastic(&mut lp, &mut coeffs, Sense::Eq, price, &label);
        lp.add_row(coeffs, Sense::Eq, rhs, label);
    }
    for (q, row) in r.rows.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = (0..ma).map(|c| (u_a[c], row.aa[c])).collect();
        let rhs = row.rhs - dot(&row.ax, x_hat) - dot(&row.ab, u_b);
        let label = format!("row{q}");
        add_elastic(&mut lp, &mut coeffs, row.sense, price, &label);
        lp.add_row(coeffs, row.sense, rhs, label);
    }
    for (q, cut) in store.cuts(t + 1, j)?.iter().enumerate() {
        let mut coeffs = vec![(phi, 1.0)];
        coeffs.extend((0..n).map(|c| (x_next[c], -cut.beta[c])));
        lp.add_row(coeffs, Sense::Ge, cut.alpha, format!("cut{q}"));
    }
    if t + 1 == p.horizon() {
        for (q, row) in store.terminal_rows(j).iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x_next[c], row.ax[c])).collect();
            let label = format!("term{q}");
            add_elastic(&mut lp, &mut coeffs, row.sense, price, &label);
            lp.add_row(coeffs, row.sense, row.rhs, label);
        }
    }

    let sol = lp.solve().map_err(|source| StageError::Lp { t, i, source })?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(StageError::Infeasible {
                t,
                i,
                x: x_hat.to_vec(),
            })
        }
        LpStatus::Unbounded => {
            return Err(StageError::Unbounded {
                t,
                i,
                x: x_hat.to_vec(),
            })
        }
    }
    let ua: Vec<f64> = u_a.iter().map(|&k| sol.x[k]).collect();
    Ok(Recourse {
        x_next: r.next_state(x_hat, u_b, &ua),
        stage_cost: r.stage_cost(x_hat, u_b, &ua),
        value: sol.objective,
        epi: sol.x[phi],
        u_a: ua,
    })
}
