//! Invariant checks for problem instances.

use std::fmt;

use super::{Bounds, DhdProblem, InitialState, Matrix, RealizationKey};

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    Dims,
    /// Lattice sizes or transition matrix shapes.
    MarkovShape,
    /// `K_0` must be 1.
    InitialMarkovState,
    NegativeProbability,
    ProbabilitySum,
    NoiseShape,
    MissingRealization,
    /// A realization keyed outside the lattice or noise supports.
    StrayRealization,
    RealizationShape,
    NonFinite,
    BoundOrder,
    EmptyTerminalCuts,
    TerminalShape,
    InitialStateShape,
    StateBoundsRequired,
    StateBoundsShape,
    StageLowerBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> Vec<ViolationKind> {
        let mut k: Vec<_> = self.violations.iter().map(|v| v.kind).collect();
        k.sort();
        k.dedup();
        k
    }

    fn push(&mut self, kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Lists every invariant violation of `p`.
pub fn validate(p: &DhdProblem) -> ValidationReport {
    let mut r = ValidationReport::default();
    let d = p.dims;
    if d.horizon < 1 || d.state_dim < 1 {
        r.push(ViolationKind::Dims, "dims", "T and N must be at least 1");
        return r;
    }
    let t_max = d.horizon;
    let n = d.state_dim;

    // Lattice.
    let k = &p.markov.states_per_stage;
    let mut lattice_ok = true;
    if k.len() != t_max + 1 {
        r.push(
            ViolationKind::MarkovShape,
            "markov.states_per_stage",
            format!("expected {} entries, found {}", t_max + 1, k.len()),
        );
        lattice_ok = false;
    } else {
        if k[0] != 1 {
            r.push(
                ViolationKind::InitialMarkovState,
                "markov.states_per_stage[0]",
                format!("the initial stage must have exactly one Markov state, found {}", k[0]),
            );
        }
        for (t, &kt) in k.iter().enumerate() {
            if kt == 0 {
                r.push(
                    ViolationKind::MarkovShape,
                    format!("markov.states_per_stage[{t}]"),
                    "stage without Markov states",
                );
                lattice_ok = false;
            }
        }
    }
    let tr = &p.markov.transitions;
    if tr.len() != t_max {
        r.push(
            ViolationKind::MarkovShape,
            "markov.transitions",
            format!("expected {t_max} matrices, found {}", tr.len()),
        );
        lattice_ok = false;
    } else if lattice_ok {
        for t in 0..t_max {
            if tr[t].len() != k[t] || tr[t].iter().any(|row| row.len() != k[t + 1]) {
                r.push(
                    ViolationKind::MarkovShape,
                    format!("markov.transitions[{t}]"),
                    format!("expected a {}x{} matrix", k[t], k[t + 1]),
                );
                lattice_ok = false;
                continue;
            }
            for (i, row) in tr[t].iter().enumerate() {
                probability_vector(&mut r, row, &format!("markov.transitions[{t}][{i}]"));
            }
        }
    }

    // Noise.
    let noise = &p.noise;
    let mut noise_ok = true;
    if noise.support_sizes.len() != t_max || noise.probabilities.len() != t_max {
        r.push(
            ViolationKind::NoiseShape,
            "noise",
            format!("expected support sizes and probabilities for {t_max} stages"),
        );
        noise_ok = false;
    } else {
        for t in 0..t_max {
            let size = noise.support_sizes[t];
            let probs = &noise.probabilities[t];
            if size == 0 || probs.len() != size {
                r.push(
                    ViolationKind::NoiseShape,
                    format!("noise.probabilities[{t}]"),
                    format!("support size {size} with {} probabilities", probs.len()),
                );
                noise_ok = false;
                continue;
            }
            probability_vector(&mut r, probs, &format!("noise.probabilities[{t}]"));
        }
    }

    // Coverage.
    if lattice_ok && noise_ok {
        for t in 0..t_max {
            for i in 0..k[t] {
                for j in 0..k[t + 1] {
                    if tr[t][i][j] <= 0.0 {
                        continue;
                    }
                    for e in 0..noise.support_sizes[t] {
                        if p.realization(t, i, j, e).is_none() {
                            r.push(
                                ViolationKind::MissingRealization,
                                format!("realizations(t={t}, i={i}, j={j}, e={e})"),
                                format!("no realization for (t={t}, i={i}, j={j}, e={e})"),
                            );
                        }
                    }
                }
            }
        }
        for key in p.realizations.keys() {
            let RealizationKey { t, i, j, e } = *key;
            if t >= t_max || i >= k[t] || j >= k[t + 1] || e >= noise.support_sizes[t] {
                r.push(
                    ViolationKind::StrayRealization,
                    format!("realizations(t={t}, i={i}, j={j}, e={e})"),
                    "realization outside the lattice or noise support",
                );
            }
        }
    }

    // Realization data.
    for (key, real) in &p.realizations {
        let RealizationKey { t, i, j, e } = *key;
        let at = |f: &str| format!("realizations(t={t}, i={i}, j={j}, e={e}).{f}");
        let (mb, ma) = (d.control_b_dim, d.control_a_dim);
        matrix_shape(&mut r, &real.a, (n, n), &at("A"));
        matrix_shape(&mut r, &real.bb, (n, mb), &at("Bb"));
        matrix_shape(&mut r, &real.ba, (n, ma), &at("Ba"));
        vector(&mut r, &real.w, n, &at("W"));
        vector(&mut r, &real.cost_x, n, &at("cost_x"));
        vector(&mut r, &real.cost_b, mb, &at("cost_b"));
        vector(&mut r, &real.cost_a, ma, &at("cost_a"));
        for (q, row) in real.rows.iter().enumerate() {
            vector(&mut r, &row.ax, n, &at(&format!("rows[{q}].ax")));
            vector(&mut r, &row.ab, mb, &at(&format!("rows[{q}].ab")));
            vector(&mut r, &row.aa, ma, &at(&format!("rows[{q}].aa")));
            scalar(&mut r, row.rhs, &at(&format!("rows[{q}].rhs")));
        }
        bounds(
            &mut r,
            &real.bounds_b,
            mb,
            &at("bounds_b"),
            ViolationKind::RealizationShape,
        );
        bounds(
            &mut r,
            &real.bounds_a,
            ma,
            &at("bounds_a"),
            ViolationKind::RealizationShape,
        );
    }

    // Terminal function.
    let term = &p.terminal;
    let expected_pieces = if term.per_markov && lattice_ok { k[t_max] } else { 1 };
    if term.pieces.len() != expected_pieces {
        r.push(
            ViolationKind::TerminalShape,
            "terminal",
            format!(
                "expected {expected_pieces} terminal cut lists, found {}",
                term.pieces.len()
            ),
        );
    }
    for (s, piece) in term.pieces.iter().enumerate() {
        let base = if term.per_markov {
            format!("terminal.cuts[{s}]")
        } else {
            "terminal.cuts".to_string()
        };
        if piece.cuts.is_empty() {
            r.push(
                ViolationKind::EmptyTerminalCuts,
                base.clone(),
                "terminal cut list is empty",
            );
        }
        for (c, cut) in piece.cuts.iter().enumerate() {
            scalar(&mut r, cut.alpha, &format!("{base}[{c}].alpha"));
            if cut.beta.len() != n {
                r.push(
                    ViolationKind::TerminalShape,
                    format!("{base}[{c}].beta"),
                    format!("expected {n} entries, found {}", cut.beta.len()),
                );
            } else {
                finite_all(&mut r, &cut.beta, &format!("{base}[{c}].beta"));
            }
        }
        for (q, row) in piece.rows.iter().enumerate() {
            let path = if term.per_markov {
                format!("terminal.rows[{s}][{q}]")
            } else {
                format!("terminal.rows[{q}]")
            };
            if row.ax.len() != n {
                r.push(
                    ViolationKind::TerminalShape,
                    format!("{path}.ax"),
                    format!("expected {n} entries, found {}", row.ax.len()),
                );
            }
            scalar(&mut r, row.rhs, &format!("{path}.rhs"));
        }
    }

    // Initial state and box.
    if let Some(b) = &p.state_bounds {
        bounds(&mut r, b, n, "state_bounds", ViolationKind::StateBoundsShape);
    }
    match &p.initial_state {
        InitialState::Fixed(x) => {
            if x.len() != n {
                r.push(
                    ViolationKind::InitialStateShape,
                    "initial_state",
                    format!("expected {n} entries, found {}", x.len()),
                );
            } else if x.iter().any(|v| !v.is_finite()) {
                r.push(ViolationKind::NonFinite, "initial_state", "non-finite entry");
            }
        }
        InitialState::Free => match &p.state_bounds {
            None => r.push(
                ViolationKind::StateBoundsRequired,
                "state_bounds",
                "state_bounds required when initial_state is free",
            ),
            Some(b) if b.iter().any(|(l, u)| !l.is_finite() || !u.is_finite()) => r.push(
                ViolationKind::StateBoundsRequired,
                "state_bounds",
                "state_bounds must be finite when initial_state is free",
            ),
            Some(_) => {}
        },
    }

    // Stage lower bounds.
    let lb = &p.stage_lower_bounds;
    if lb.len() != t_max + 1 {
        r.push(
            ViolationKind::StageLowerBounds,
            "stage_lower_bounds",
            format!("expected {} finite values, found {}", t_max + 1, lb.len()),
        );
    } else if let Some(t) = lb.iter().position(|v| !v.is_finite()) {
        r.push(
            ViolationKind::StageLowerBounds,
            format!("stage_lower_bounds[{t}]"),
            "stage lower bounds must be finite",
        );
    }
    r
}

fn probability_vector(r: &mut ValidationReport, v: &[f64], path: &str) {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        r.push(
            ViolationKind::NegativeProbability,
            path,
            "probabilities must be finite and nonnegative",
        );
        return;
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        r.push(
            ViolationKind::ProbabilitySum,
            path,
            format!("probabilities sum to {sum}, not 1"),
        );
    }
}

fn matrix_shape(r: &mut ValidationReport, m: &Matrix, shape: (usize, usize), path: &str) {
    if m.shape() != shape {
        r.push(
            ViolationKind::RealizationShape,
            path,
            format!("expected {}x{}, found {}x{}", shape.0, shape.1, m.rows(), m.cols()),
        );
    } else {
        finite_all(r, m.data(), path);
    }
}

fn vector(r: &mut ValidationReport, v: &[f64], len: usize, path: &str) {
    if v.len() != len {
        r.push(
            ViolationKind::RealizationShape,
            path,
            format!("expected {len} entries, found {}", v.len()),
        );
    } else {
        finite_all(r, v, path);
    }
}

fn finite_all(r: &mut ValidationReport, v: &[f64], path: &str) {
    if v.iter().any(|x| !x.is_finite()) {
        r.push(ViolationKind::NonFinite, path, "non-finite entry");
    }
}

fn scalar(r: &mut ValidationReport, v: f64, path: &str) {
    if !v.is_finite() {
        r.push(ViolationKind::NonFinite, path, "non-finite value");
    }
}

fn bounds(r: &mut ValidationReport, b: &Bounds, len: usize, path: &str, shape_kind: ViolationKind) {
    if b.len() != len {
        r.push(
            shape_kind,
            path,
            format!("expected {len} bound pairs, found {}", b.len()),
        );
        return;
    }
    for (q, &(l, u)) in b.iter().enumerate() {
        if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
            r.push(
                ViolationKind::BoundOrder,
                format!("{path}[{q}]"),
                format!("invalid bound pair [{l}, {u}]"),
            );
        }
    }
}
