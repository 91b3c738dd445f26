//! Exact reference values from the deterministic equivalent.
//!
//! The scenario tree enumerates every positive-probability history. The
//! extensive form carries one state vector per node, one `U^b` per internal
//! node (decided before its children are revealed) and one `U^a` per
//! non-root node (decided after). Subtrees rooted at `(t, i)` give the exact
//! cost-to-go `J_t(X, i)`; subtrees cut off early at stage `s` and closed
//! with stored cuts give truncated problems.

mod verify;

use thiserror::Error;

use crate::cuts::{CutError, CutStore};
use crate::lp::{LinearProgram, LpError, LpStatus, Sense, Simplex, SimplexOptions};
use crate::model::{scenario_weights, DhdProblem, InitialState, ModelError};

pub use verify::{state_grid, verify, CutViolation, VerificationReport, VerifyOptions};

/// Default cap on extensive-form nonzeros.
pub const DEFAULT_NONZERO_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("tree too large: about {estimate} LP nonzeros exceeds the cap of {cap}")]
    TreeTooLarge { estimate: usize, cap: usize },
    #[error("no feasible continuation from (t={t}, i={i}, X={x:?})")]
    Infeasible { t: usize, i: usize, x: Vec<f64> },
    #[error("extensive form is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cut(#[from] CutError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub stage: usize,
    pub markov: usize,
    /// Noise outcome on the edge from the parent.
    pub noise: Option<usize>,
    pub parent: Option<usize>,
    pub prob: f64,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    pub nodes: Vec<TreeNode>,
    /// Node indices per stage, starting at the root stage.
    pub levels: Vec<Vec<usize>>,
    pub root_stage: usize,
}

/// Number of nodes in the subtree of `(t0, i0)` down to `last`.
pub fn count_nodes(p: &DhdProblem, t0: usize, i0: usize, last: usize) -> f64 {
    let mut per_state = vec![0.0; p.num_markov(t0)];
    per_state[i0] = 1.0;
    let mut total = 1.0;
    for t in t0..last {
        let mut next = vec![0.0; p.num_markov(t + 1)];
        for (i, &c) in per_state.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for j in 0..p.num_markov(t + 1) {
                let branches = (0..p.noise.support_sizes[t])
                    .filter(|&e| p.transition(t, i, j) * p.noise_prob(t, e) > 0.0)
                    .count();
                next[j] += c * branches as f64;
            }
        }
        total += next.iter().sum::<f64>();
        per_state = next;
    }
    total
}

impl ScenarioTree {
    pub fn build(p: &DhdProblem, t0: usize, i0: usize, last: usize) -> Result<Self, OracleError> {
        let mut nodes = vec![TreeNode {
            stage: t0,
            markov: i0,
            noise: None,
            parent: None,
            prob: 1.0,
            children: Vec::new(),
        }];
        let mut levels = vec![vec![0]];
        for t in t0..last {
            let mut level = Vec::new();
            for &n in &levels[t - t0] {
                let (i, prob) = (nodes[n].markov, nodes[n].prob);
                for ((j, e), w) in scenario_weights(p, t, i)? {
                    let id = nodes.len();
                    nodes.push(TreeNode {
                        stage: t + 1,
                        markov: j,
                        noise: Some(e),
                        parent: Some(n),
                        prob: prob * w,
                        children: Vec::new(),
                    });
                    nodes[n].children.push(id);
                    level.push(id);
                }
            }
            levels.push(level);
        }
        Ok(Self {
            nodes,
            levels,
            root_stage: t0,
        })
    }

    pub fn leaves(&self) -> &[usize] {
        self.levels.last().expect("tree has a root level")
    }
}

/// How the root state is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootState<'a> {
    /// Pinned by anchor rows.
    Fixed(&'a [f64]),
    /// Free inside the state box.
    Free,
}

/// Which augmented form to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    DecisionHazardDecision,
    /// State `(X, U^b)`, controls `(U^a, Ũ)` with `U^b_next = Ũ`.
    HazardDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveForm {
    pub lp: LinearProgram,
    pub tree: ScenarioTree,
    /// State columns per node.
    pub x: Vec<Vec<usize>>,
    /// `U^b` columns per internal node, empty at leaves.
    pub u_b: Vec<Vec<usize>>,
    /// `U^a` columns per non-root node, empty at the root.
    pub u_a: Vec<Vec<usize>>,
    /// Anchor rows of a fixed root state.
    pub anchor_rows: Vec<usize>,
}

fn estimate_nonzeros(p: &DhdProblem, store: &CutStore, t0: usize, i0: usize, last: usize) -> f64 {
    let n = p.dims.state_dim as f64;
    let mb = p.dims.control_b_dim as f64;
    let ma = p.dims.control_a_dim as f64;
    let max_rows = p.realizations.values().map(|r| r.rows.len()).max().unwrap_or(0) as f64;
    let leaf_cuts = (0..p.num_markov(last))
        .map(|i| store.cuts(last, i).map_or(0, |c| c.len()))
        .max()
        .unwrap_or(0) as f64;
    let per_node = n * (1.0 + n + mb + ma) + max_rows * (n + mb + ma) + mb * 2.0;
    count_nodes(p, t0, i0, last) * (per_node + leaf_cuts * (n + 1.0) + n)
}

/// Builds the deterministic equivalent of the subtree rooted at `(t0, i0)`
/// down to stage `last`. Leaves are closed with the cuts stored at
/// `(last, i)`, plus the terminal domain rows when `last = T`.
#[allow(clippy::too_many_arguments)]
pub fn build_subtree(
    p: &DhdProblem,
    leaf_cuts: &CutStore,
    t0: usize,
    i0: usize,
    root: RootState<'_>,
    last: usize,
    form: Formulation,
    nonzero_cap: usize,
) -> Result<ExtensiveForm, OracleError> {
    let estimate = estimate_nonzeros(p, leaf_cuts, t0, i0, last);
    if estimate > nonzero_cap as f64 {
        return Err(OracleError::TreeTooLarge {
            estimate: estimate as usize,
            cap: nonzero_cap,
        });
    }
    let tree = ScenarioTree::build(p, t0, i0, last)?;
    let n = p.dims.state_dim;
    let mb = p.dims.control_b_dim;
    let ma = p.dims.control_a_dim;
    let state_box = p.state_box();
    let mut lp = LinearProgram::new();
    let count = tree.nodes.len();
    let mut x = vec![Vec::new(); count];
    let mut u_b = vec![Vec::new(); count];
    let mut u_a = vec![Vec::new(); count];
    let mut anchor_rows = Vec::new();

    for (id, node) in tree.nodes.iter().enumerate() {
        let bounds = |k: usize| {
            if node.parent.is_none() {
                match root {
                    RootState::Fixed(_) => (f64::NEG_INFINITY, f64::INFINITY),
                    RootState::Free => state_box[k],
                }
            } else {
                state_box[k]
            }
        };
        x[id] = (0..n)
            .map(|k| {
                let (lo, hi) = bounds(k);
                lp.add_var(0.0, lo, hi, format!("n{id}.x{k}"))
            })
            .collect();
        if let (None, RootState::Fixed(x0)) = (node.parent, root) {
            anchor_rows = (0..n)
                .map(|k| lp.add_row([(x[id][k], 1.0)], Sense::Eq, x0[k], format!("anchor{k}")))
                .collect();
        }

        if !node.children.is_empty() {
            let mut bb = vec![(f64::NEG_INFINITY, f64::INFINITY); mb];
            for &c in &node.children {
                let child = &tree.nodes[c];
                let r = p.stage_data(node.stage, node.markov, child.markov, child.noise.unwrap());
                for (k, &(lo, hi)) in r.bounds_b.iter().enumerate() {
                    bb[k].0 = bb[k].0.max(lo);
                    bb[k].1 = bb[k].1.min(hi);
                }
            }
            u_b[id] = match (form, node.parent) {
                (Formulation::HazardDecision, Some(_)) => (0..mb)
                    .map(|k| {
                        let state = lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY, format!("n{id}.ub{k}"));
                        let control = lp.add_var(0.0, bb[k].0, bb[k].1, format!("n{id}.ut{k}"));
                        lp.add_row(
                            [(state, 1.0), (control, -1.0)],
                            Sense::Eq,
                            0.0,
                            format!("n{id}.copy{k}"),
                        );
                        state
                    })
                    .collect(),
                _ => (0..mb)
                    .map(|k| lp.add_var(0.0, bb[k].0, bb[k].1, format!("n{id}.ub{k}")))
                    .collect(),
            };
        }

        if let Some(parent) = node.parent {
            let pn = &tree.nodes[parent];
            let r = p.stage_data(pn.stage, pn.markov, node.markov, node.noise.unwrap());
            u_a[id] = (0..ma)
                .map(|k| lp.add_var(0.0, r.bounds_a[k].0, r.bounds_a[k].1, format!("n{id}.ua{k}")))
                .collect();
            let w = node.prob;
            let add_cost = |lp: &mut LinearProgram, col: usize, c: f64| {
                let cur = lp.objective()[col];
                lp.set_cost(col, cur + w * c);
            };
            for k in 0..n {
                add_cost(&mut lp, x[parent][k], r.cost_x[k]);
            }
            for k in 0..mb {
                add_cost(&mut lp, u_b[parent][k], r.cost_b[k]);
            }
            for k in 0..ma {
                add_cost(&mut lp, u_a[id][k], r.cost_a[k]);
            }
            for row in 0..n {
                let mut coeffs = vec![(x[id][row], 1.0)];
                coeffs.extend((0..n).map(|c| (x[parent][c], -r.a.get(row, c))));
                coeffs.extend((0..mb).map(|c| (u_b[parent][c], -r.bb.get(row, c))));
                coeffs.extend((0..ma).map(|c| (u_a[id][c], -r.ba.get(row, c))));
                lp.add_row(coeffs, Sense::Eq, r.w[row], format!("n{id}.dyn{row}"));
            }
            for (q, row) in r.rows.iter().enumerate() {
                let mut coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x[parent][c], row.ax[c])).collect();
                coeffs.extend((0..mb).map(|c| (u_b[parent][c], row.ab[c])));
                coeffs.extend((0..ma).map(|c| (u_a[id][c], row.aa[c])));
                lp.add_row(coeffs, row.sense, row.rhs, format!("n{id}.row{q}"));
            }
        }

        if node.stage == last {
            let phi = lp.add_var(node.prob, f64::NEG_INFINITY, f64::INFINITY, format!("n{id}.phi"));
            for (q, cut) in leaf_cuts.cuts(last, node.markov)?.iter().enumerate() {
                let mut coeffs = vec![(phi, 1.0)];
                coeffs.extend((0..n).map(|c| (x[id][c], -cut.beta[c])));
                lp.add_row(coeffs, Sense::Ge, cut.alpha, format!("n{id}.cut{q}"));
            }
            if last == p.horizon() {
                for (q, row) in leaf_cuts.terminal_rows(node.markov).iter().enumerate() {
                    let coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x[id][c], row.ax[c])).collect();
                    lp.add_row(coeffs, row.sense, row.rhs, format!("n{id}.term{q}"));
                }
            }
        }
    }

    Ok(ExtensiveForm {
        lp,
        tree,
        x,
        u_b,
        u_a,
        anchor_rows,
    })
}

fn root_state(p: &DhdProblem) -> RootState<'_> {
    match &p.initial_state {
        InitialState::Fixed(x0) => RootState::Fixed(x0),
        InitialState::Free => RootState::Free,
    }
}

/// The full deterministic equivalent of `p`.
pub fn build_extensive_form(p: &DhdProblem, nonzero_cap: usize) -> Result<ExtensiveForm, OracleError> {
    let store = CutStore::initialize(p);
    build_subtree(
        p,
        &store,
        0,
        0,
        root_state(p),
        p.horizon(),
        Formulation::DecisionHazardDecision,
        nonzero_cap,
    )
}

/// The problem truncated at stage `s`, closed with the cuts of `store` at
/// stage `s`.
pub fn build_truncated(
    p: &DhdProblem,
    store: &CutStore,
    s: usize,
    nonzero_cap: usize,
) -> Result<ExtensiveForm, OracleError> {
    build_subtree(
        p,
        store,
        0,
        0,
        root_state(p),
        s,
        Formulation::DecisionHazardDecision,
        nonzero_cap,
    )
}

fn solve_form(form: &ExtensiveForm, p: &DhdProblem) -> Result<f64, OracleError> {
    let sol = form.lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Err(OracleError::Unbounded),
        LpStatus::Infeasible => Err(OracleError::Infeasible {
            t: 0,
            i: 0,
            x: match &p.initial_state {
                InitialState::Fixed(x) => x.clone(),
                InitialState::Free => Vec::new(),
            },
        }),
    }
}

/// Optimal value of the full problem.
pub fn extensive_optimum(p: &DhdProblem, nonzero_cap: usize) -> Result<f64, OracleError> {
    solve_form(&build_extensive_form(p, nonzero_cap)?, p)
}

/// Optimal value of the problem truncated at stage `s`.
pub fn truncated_optimum(p: &DhdProblem, store: &CutStore, s: usize, nonzero_cap: usize) -> Result<f64, OracleError> {
    solve_form(&build_truncated(p, store, s, nonzero_cap)?, p)
}

/// Exact cost-to-go `J_t(·, i)` backed by one subtree LP that is re-solved
/// from its previous basis for each query point.
#[derive(Debug, Clone)]
pub struct ExactValue {
    t: usize,
    i: usize,
    simplex: Simplex,
    anchor_rows: Vec<usize>,
}

impl ExactValue {
    pub fn new(p: &DhdProblem, t: usize, i: usize, nonzero_cap: usize) -> Result<Self, OracleError> {
        let store = CutStore::initialize(p);
        let origin = vec![0.0; p.dims.state_dim];
        let form = build_subtree(
            p,
            &store,
            t,
            i,
            RootState::Fixed(&origin),
            p.horizon(),
            Formulation::DecisionHazardDecision,
            nonzero_cap,
        )?;
        Ok(Self {
            t,
            i,
            simplex: Simplex::new(&form.lp, SimplexOptions::default())?,
            anchor_rows: form.anchor_rows,
        })
    }

    /// `J_t(x, i)` and a subgradient in `x`.
    pub fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        for (&row, &v) in self.anchor_rows.iter().zip(x) {
            self.simplex.set_rhs(row, v);
        }
        let sol = self.simplex.solve()?;
        match sol.status {
            LpStatus::Optimal => Ok((sol.objective, self.anchor_rows.iter().map(|&r| sol.duals[r]).collect())),
            LpStatus::Infeasible => Err(OracleError::Infeasible {
                t: self.t,
                i: self.i,
                x: x.to_vec(),
            }),
            LpStatus::Unbounded => Err(OracleError::Unbounded),
        }
    }
}

/// One-off exact cost-to-go `J_t(x, i)`.
pub fn exact_value(p: &DhdProblem, t: usize, i: usize, x: &[f64], nonzero_cap: usize) -> Result<f64, OracleError> {
    ExactValue::new(p, t, i, nonzero_cap)?.eval(x).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdCheck {
    pub dhd_optimum: f64,
    pub hd_optimum: f64,
    pub difference: f64,
}

/// Solves the hazard-decision form with augmented state `(X, U^b)` and
/// compares it with the decision-hazard-decision extensive form.
pub fn check_hd_reformulation(p: &DhdProblem, nonzero_cap: usize) -> Result<HdCheck, OracleError> {
    let store = CutStore::initialize(p);
    let dhd = extensive_optimum(p, nonzero_cap)?;
    let hd_form = build_subtree(
        p,
        &store,
        0,
        0,
        root_state(p),
        p.horizon(),
        Formulation::HazardDecision,
        nonzero_cap,
    )?;
    let hd = solve_form(&hd_form, p)?;
    Ok(HdCheck {
        dhd_optimum: dhd,
        hd_optimum: hd,
        difference: (dhd - hd).abs(),
    })
}
