//! Problem instances: dimensions, the Markov lattice, noise supports, stage
//! data keyed by `(t, i, j, e)` and the terminal cost.
//!
//! Stage index `t` in a realization key denotes the transition `t -> t+1`,
//! `i` the Markov state at `t`, `j` the state at `t+1` and `e` the noise
//! outcome drawn at `t+1`.

mod io;
mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lp::Sense;

pub use io::{load_problem, load_problem_file, to_json};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Number of transitions `T`.
    pub horizon: usize,
    /// `N`
    pub state_dim: usize,
    /// `Mb`, controls fixed before the noise is revealed.
    pub control_b_dim: usize,
    /// `Ma`, controls chosen after the noise is revealed.
    pub control_a_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovLattice {
    /// `K_t` for `t = 0..=T`.
    pub states_per_stage: Vec<usize>,
    /// `transitions[t][i][j]` for `t = 0..T`.
    pub transitions: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// `E_t` for `t = 1..=T`; index 0 is stage 1.
    pub support_sizes: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, 1.0);
        }
        m
    }

    /// Builds from row vectors; `None` if they are ragged.
    pub fn from_rows(rows: &[Vec<f64>], cols_if_empty: usize) -> Option<Self> {
        let cols = rows.first().map_or(cols_if_empty, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ax·X + ab·U^b + aa·U^a  (sense)  rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub ax: Vec<f64>,
    pub ab: Vec<f64>,
    pub aa: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `ax·X  (sense)  rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub ax: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl StateRow {
    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        let act = dot(&self.ax, x);
        match self.sense {
            Sense::Le => act <= self.rhs + tol,
            Sense::Ge => act >= self.rhs - tol,
            Sense::Eq => (act - self.rhs).abs() <= tol,
        }
    }
}

/// Per-coordinate `[lower, upper]`, infinite entries allowed.
pub type Bounds = Vec<(f64, f64)>;

pub fn unbounded(n: usize) -> Bounds {
    vec![(f64::NEG_INFINITY, f64::INFINITY); n]
}

/// Data of one transition `t -> t+1` for Markov edge `i -> j` and noise `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRealization {
    pub a: Matrix,
    pub bb: Matrix,
    pub ba: Matrix,
    pub w: Vec<f64>,
    pub cost_x: Vec<f64>,
    pub cost_b: Vec<f64>,
    pub cost_a: Vec<f64>,
    pub rows: Vec<StageRow>,
    pub bounds_b: Bounds,
    pub bounds_a: Bounds,
}

impl StageRealization {
    /// Zero data of the right shapes with identity dynamics.
    pub fn zeros(dims: &Dims) -> Self {
        let (n, mb, ma) = (dims.state_dim, dims.control_b_dim, dims.control_a_dim);
        Self {
            a: Matrix::identity(n),
            bb: Matrix::zeros(n, mb),
            ba: Matrix::zeros(n, ma),
            w: vec![0.0; n],
            cost_x: vec![0.0; n],
            cost_b: vec![0.0; mb],
            cost_a: vec![0.0; ma],
            rows: Vec::new(),
            bounds_b: unbounded(mb),
            bounds_a: unbounded(ma),
        }
    }

    /// `A x + Bb ub + Ba ua + W`
    pub fn next_state(&self, x: &[f64], ub: &[f64], ua: &[f64]) -> Vec<f64> {
        let mut out = self.a.mul_vec(x);
        for (r, v) in out.iter_mut().enumerate() {
            *v += dot(self.bb.row(r), ub) + dot(self.ba.row(r), ua) + self.w[r];
        }
        out
    }

    pub fn stage_cost(&self, x: &[f64], ub: &[f64], ua: &[f64]) -> f64 {
        dot(&self.cost_x, x) + dot(&self.cost_b, ub) + dot(&self.cost_a, ua)
    }
}

/// Affine function `alpha + beta·X`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alpha + dot(&self.beta, x)
    }
}

/// Terminal cost for one Markov state: max of cuts on a polyhedral domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPiece {
    pub cuts: Vec<AffinePiece>,
    pub rows: Vec<StateRow>,
}

impl TerminalPiece {
    /// `None` outside the domain.
    pub fn eval(&self, x: &[f64], tol: f64) -> Option<f64> {
        if !self.rows.iter().all(|r| r.is_satisfied(x, tol)) {
            return None;
        }
        self.cuts.iter().map(|c| c.eval(x)).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalFunction {
    pub per_markov: bool,
    /// One piece when shared, `K_T` pieces when `per_markov`.
    pub pieces: Vec<TerminalPiece>,
}

impl TerminalFunction {
    pub fn for_state(&self, i: usize) -> &TerminalPiece {
        if self.per_markov {
            &self.pieces[i]
        } else {
            &self.pieces[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(Vec<f64>),
    /// Chosen by the optimizer inside the state box.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RealizationKey {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub e: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhdProblem {
    pub dims: Dims,
    pub markov: MarkovLattice,
    pub noise: NoiseModel,
    pub realizations: BTreeMap<RealizationKey, StageRealization>,
    pub terminal: TerminalFunction,
    pub initial_state: InitialState,
    pub state_bounds: Option<Bounds>,
    /// `LB_t` for `t = 0..=T`.
    pub stage_lower_bounds: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

impl DhdProblem {
    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn num_markov(&self, t: usize) -> usize {
        self.markov.states_per_stage[t]
    }

    pub fn transition(&self, t: usize, i: usize, j: usize) -> f64 {
        self.markov.transitions[t][i][j]
    }

    /// Probability of noise outcome `e` on the transition `t -> t+1`.
    pub fn noise_prob(&self, t: usize, e: usize) -> f64 {
        self.noise.probabilities[t][e]
    }

    pub fn realization(&self, t: usize, i: usize, j: usize, e: usize) -> Option<&StageRealization> {
        self.realizations.get(&RealizationKey { t, i, j, e })
    }

    /// Like [`Self::realization`] for pairs returned by [`scenario_weights`].
    pub fn stage_data(&self, t: usize, i: usize, j: usize, e: usize) -> &StageRealization {
        self.realization(t, i, j, e)
            .unwrap_or_else(|| panic!("no realization for (t={t}, i={i}, j={j}, e={e})"))
    }

    /// The state box, with infinite entries when absent.
    pub fn state_box(&self) -> Bounds {
        self.state_bounds
            .clone()
            .unwrap_or_else(|| unbounded(self.dims.state_dim))
    }

    pub fn lower_bound(&self, t: usize) -> f64 {
        self.stage_lower_bounds[t]
    }
}

/// Successor `(j, e)` and its probability.
pub type ScenarioWeight = ((usize, usize), f64);

/// Positive-probability successors `((j, e), p)` of Markov state `i` at
/// stage `t`, ordered by `j` then `e`.
pub fn scenario_weights(p: &DhdProblem, t: usize, i: usize) -> Result<Vec<ScenarioWeight>, ModelError> {
    if t >= p.dims.horizon {
        return Err(ModelError::IndexOutOfRange(format!(
            "stage {t} with horizon {}",
            p.dims.horizon
        )));
    }
    if i >= p.num_markov(t) {
        return Err(ModelError::IndexOutOfRange(format!(
            "Markov state {i} at stage {t} with {} states",
            p.num_markov(t)
        )));
    }
    let mut out = Vec::new();
    for (j, &pj) in p.markov.transitions[t][i].iter().enumerate() {
        for (e, &pe) in p.noise.probabilities[t].iter().enumerate() {
            let w = pj * pe;
            if w > 0.0 {
                out.push(((j, e), w));
            }
        }
    }
    Ok(out)
}
