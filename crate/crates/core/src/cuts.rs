//! Polyhedral lower approximations of the cost-to-go functions.
//!
//! Cuts are kept per `(t, i)`: stage `t` and Markov state `i` at that stage.
//! Stage `T` holds the terminal cuts (one list per terminal Markov state when
//! the terminal function is given per state) together with the terminal
//! domain rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{dot, DhdProblem, StateRow};

/// Two cuts closer than this in every coefficient count as the same cut.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Affine minorant `alpha + beta·X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub iteration_born: usize,
    /// State at which the cut was generated; `None` for initial and terminal cuts.
    pub source_state: Option<Vec<f64>>,
}

impl Cut {
    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            alpha: value,
            beta: vec![0.0; n],
            iteration_born: 0,
            source_state: None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alpha + dot(&self.beta, x)
    }

    fn same_as(&self, other: &Cut) -> bool {
        (self.alpha - other.alpha).abs() <= DUPLICATE_TOL
            && self
                .beta
                .iter()
                .zip(&other.beta)
                .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
    }
}

/// One entry of a cut dump file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub t: usize,
    pub i: usize,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub iteration_born: usize,
    pub source_state: Option<Vec<f64>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("no cut list at stage {t}, Markov state {i}")]
    IndexOutOfRange { t: usize, i: usize },
    #[error("cut has non-finite coefficients")]
    NonFinite,
    #[error("cut slope has {found} entries, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("terminal cuts are fixed by the problem")]
    TerminalStage,
    #[error("invalid cut dump: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutStore {
    state_dim: usize,
    /// `lists[t][i]` for `t = 0..=T`.
    lists: Vec<Vec<Vec<Cut>>>,
    /// Terminal domain rows per terminal Markov state.
    terminal_rows: Vec<Vec<StateRow>>,
}

impl CutStore {
    /// Constant cuts `LB_t` for `t < T` and the terminal cuts at `T`.
    pub fn initialize(p: &DhdProblem) -> Self {
        let n = p.dims.state_dim;
        let t_max = p.horizon();
        let mut lists = Vec::with_capacity(t_max + 1);
        for t in 0..t_max {
            let cut = Cut::constant(p.lower_bound(t), n);
            lists.push(vec![vec![cut]; p.num_markov(t)]);
        }
        let k_t = p.num_markov(t_max);
        let terminal: Vec<Vec<Cut>> = (0..k_t)
            .map(|i| {
                p.terminal
                    .for_state(i)
                    .cuts
                    .iter()
                    .map(|c| Cut {
                        alpha: c.alpha,
                        beta: c.beta.clone(),
                        iteration_born: 0,
                        source_state: None,
                    })
                    .collect()
            })
            .collect();
        lists.push(terminal);
        let terminal_rows = (0..k_t).map(|i| p.terminal.for_state(i).rows.clone()).collect();
        Self {
            state_dim: n,
            lists,
            terminal_rows,
        }
    }

    pub fn horizon(&self) -> usize {
        self.lists.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_states(&self, t: usize) -> usize {
        self.lists[t].len()
    }

    fn check(&self, t: usize, i: usize) -> Result<(), CutError> {
        if t < self.lists.len() && i < self.lists[t].len() {
            Ok(())
        } else {
            Err(CutError::IndexOutOfRange { t, i })
        }
    }

    pub fn cuts(&self, t: usize, i: usize) -> Result<&[Cut], CutError> {
        self.check(t, i)?;
        Ok(&self.lists[t][i])
    }

    /// Domain rows of the terminal function for terminal Markov state `i`.
    pub fn terminal_rows(&self, i: usize) -> &[StateRow] {
        &self.terminal_rows[i]
    }

    /// Number of cuts at stage `t`, summed over Markov states.
    pub fn stage_count(&self, t: usize) -> usize {
        self.lists[t].iter().map(Vec::len).sum()
    }

    /// Number of cuts at stages `0..T`.
    pub fn total(&self) -> usize {
        (0..self.horizon()).map(|t| self.stage_count(t)).sum()
    }

    /// `max_c alpha_c + beta_c·X` over the cuts at `(t, i)`.
    pub fn evaluate(&self, t: usize, i: usize, x: &[f64]) -> Result<f64, CutError> {
        self.check(t, i)?;
        Ok(self.lists[t][i]
            .iter()
            .map(|c| c.eval(x))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Adds a cut at `(t, i)` for `t < T`. Returns `false` when an identical
    /// cut is already present.
    pub fn add_cut(&mut self, t: usize, i: usize, cut: Cut) -> Result<bool, CutError> {
        self.check(t, i)?;
        if t == self.horizon() {
            return Err(CutError::TerminalStage);
        }
        if cut.beta.len() != self.state_dim {
            return Err(CutError::Dimension {
                expected: self.state_dim,
                found: cut.beta.len(),
            });
        }
        if !cut.alpha.is_finite() || cut.beta.iter().any(|b| !b.is_finite()) {
            return Err(CutError::NonFinite);
        }
        let list = &mut self.lists[t][i];
        if list.iter().any(|c| c.same_as(&cut)) {
            return Ok(false);
        }
        list.push(cut);
        Ok(true)
    }

    /// All non-terminal cuts, ordered by stage, Markov state, then insertion.
    pub fn records(&self) -> Vec<CutRecord> {
        let mut out = Vec::new();
        for t in 0..self.horizon() {
            for (i, list) in self.lists[t].iter().enumerate() {
                for c in list {
                    out.push(CutRecord {
                        t,
                        i,
                        alpha: c.alpha,
                        beta: c.beta.clone(),
                        iteration_born: c.iteration_born,
                        source_state: c.source_state.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("cut records serialize")
    }

    /// Adds every record; returns how many were new.
    pub fn import(&mut self, records: &[CutRecord]) -> Result<usize, CutError> {
        let mut added = 0;
        for r in records {
            let cut = Cut {
                alpha: r.alpha,
                beta: r.beta.clone(),
                iteration_born: r.iteration_born,
                source_state: r.source_state.clone(),
            };
            if self.add_cut(r.t, r.i, cut)? {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn import_json(&mut self, text: &str) -> Result<usize, CutError> {
        let records: Vec<CutRecord> = serde_json::from_str(text).map_err(|e| CutError::Parse(e.to_string()))?;
        self.import(&records)
    }
}
