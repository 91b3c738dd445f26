//! JSON problem files.
//!
//! Matrices are row-major, either nested (`[[1, 0], [0, 1]]`) or flat
//! (`[1, 0, 0, 1]`). Bounds are `[lower, upper]` pairs where `null` stands
//! for an infinite bound. Omitted costs, `Bb`, `Ba` and row coefficients
//! default to zeros, omitted bounds to unbounded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    validate, AffinePiece, Bounds, DhdProblem, Dims, InitialState, MarkovLattice, Matrix, ModelError, NoiseModel,
    RealizationKey, StageRealization, StageRow, StateRow, TerminalFunction, TerminalPiece,
};
use crate::lp::Sense;

type RawBound = (Option<f64>, Option<f64>);

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dims: RawDims,
    markov: RawMarkov,
    noise: RawNoise,
    realizations: Vec<RawRealization>,
    terminal: RawTerminal,
    initial_state: RawInitial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_bounds: Option<Vec<RawBound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage_lower_bounds: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDims {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "Mb")]
    mb: usize,
    #[serde(rename = "Ma")]
    ma: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarkov {
    states_per_stage: Vec<usize>,
    transitions: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    support_sizes: Vec<usize>,
    probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawMatrix {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawInitial {
    Fixed(Vec<f64>),
    Keyword(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRealization {
    t: usize,
    i: usize,
    j: usize,
    e: usize,
    #[serde(rename = "A")]
    a: RawMatrix,
    #[serde(rename = "Bb", default, skip_serializing_if = "Option::is_none")]
    bb: Option<RawMatrix>,
    #[serde(rename = "Ba", default, skip_serializing_if = "Option::is_none")]
    ba: Option<RawMatrix>,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_a: Option<Vec<f64>>,
    #[serde(default)]
    rows: Vec<RawStageRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds_b: Option<Vec<RawBound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds_a: Option<Vec<RawBound>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStageRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ax: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ab: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aa: Option<Vec<f64>>,
    sense: Sense,
    rhs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCut {
    alpha: f64,
    beta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStateRow {
    ax: Vec<f64>,
    sense: Sense,
    rhs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerminal {
    /// A list of cuts, or one list per terminal Markov state.
    cuts: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Value>,
    #[serde(default)]
    per_markov: bool,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a problem file.
pub fn load_problem(bytes: &[u8]) -> Result<DhdProblem, ModelError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let raw: RawProblem = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        ModelError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    let problem = from_raw(raw)?;
    let report = validate(&problem);
    if let Some(v) = report.violations.first() {
        return Err(schema(v.path.clone(), v.message.clone()));
    }
    Ok(problem)
}

pub fn load_problem_file(path: impl AsRef<Path>) -> Result<DhdProblem, ModelError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_problem(&bytes)
}

fn bound_from_raw(b: &RawBound) -> (f64, f64) {
    (b.0.unwrap_or(f64::NEG_INFINITY), b.1.unwrap_or(f64::INFINITY))
}

fn bound_to_raw(b: &(f64, f64)) -> RawBound {
    (b.0.is_finite().then_some(b.0), b.1.is_finite().then_some(b.1))
}

fn bounds_from_raw(raw: Option<&Vec<RawBound>>, n: usize) -> Bounds {
    match raw {
        Some(v) => v.iter().map(bound_from_raw).collect(),
        None => super::unbounded(n),
    }
}

fn matrix_from_raw(raw: &RawMatrix, rows: usize, cols: usize, path: &str) -> Result<Matrix, ModelError> {
    match raw {
        RawMatrix::Nested(r) if !r.is_empty() => {
            Matrix::from_rows(r, cols).ok_or_else(|| schema(path, "ragged matrix rows"))
        }
        RawMatrix::Nested(_) => Matrix::from_flat(rows, cols, Vec::new())
            .ok_or_else(|| schema(path, format!("expected a {rows}x{cols} matrix, found []"))),
        RawMatrix::Flat(v) => Matrix::from_flat(rows, cols, v.clone()).ok_or_else(|| {
            schema(
                path,
                format!("expected {} entries ({rows}x{cols}), found {}", rows * cols, v.len()),
            )
        }),
    }
}

fn from_raw(raw: RawProblem) -> Result<DhdProblem, ModelError> {
    let dims = Dims {
        horizon: raw.dims.t,
        state_dim: raw.dims.n,
        control_b_dim: raw.dims.mb,
        control_a_dim: raw.dims.ma,
    };
    let (n, mb, ma) = (dims.state_dim, dims.control_b_dim, dims.control_a_dim);

    let mut realizations = BTreeMap::new();
    for (k, r) in raw.realizations.iter().enumerate() {
        let path = |field: &str| format!("realizations[{k}].{field}");
        let key = RealizationKey {
            t: r.t,
            i: r.i,
            j: r.j,
            e: r.e,
        };
        let a = matrix_from_raw(&r.a, n, n, &path("A"))?;
        let bb = match &r.bb {
            Some(m) => matrix_from_raw(m, n, mb, &path("Bb"))?,
            None => Matrix::zeros(n, mb),
        };
        let ba = match &r.ba {
            Some(m) => matrix_from_raw(m, n, ma, &path("Ba"))?,
            None => Matrix::zeros(n, ma),
        };
        let rows = r
            .rows
            .iter()
            .map(|row| StageRow {
                ax: row.ax.clone().unwrap_or_else(|| vec![0.0; n]),
                ab: row.ab.clone().unwrap_or_else(|| vec![0.0; mb]),
                aa: row.aa.clone().unwrap_or_else(|| vec![0.0; ma]),
                sense: row.sense,
                rhs: row.rhs,
            })
            .collect();
        let real = StageRealization {
            a,
            bb,
            ba,
            w: r.w.clone(),
            cost_x: r.cost_x.clone().unwrap_or_else(|| vec![0.0; n]),
            cost_b: r.cost_b.clone().unwrap_or_else(|| vec![0.0; mb]),
            cost_a: r.cost_a.clone().unwrap_or_else(|| vec![0.0; ma]),
            rows,
            bounds_b: bounds_from_raw(r.bounds_b.as_ref(), mb),
            bounds_a: bounds_from_raw(r.bounds_a.as_ref(), ma),
        };
        if realizations.insert(key, real).is_some() {
            return Err(schema(
                format!("realizations[{k}]"),
                format!("duplicate realization (t={}, i={}, j={}, e={})", r.t, r.i, r.j, r.e),
            ));
        }
    }

    let terminal = terminal_from_raw(&raw.terminal)?;

    let initial_state = match raw.initial_state {
        RawInitial::Fixed(v) => InitialState::Fixed(v),
        RawInitial::Keyword(s) if s == "free" => InitialState::Free,
        RawInitial::Keyword(s) => {
            return Err(schema(
                "initial_state",
                format!("expected an array or \"free\", found \"{s}\""),
            ))
        }
    };

    Ok(DhdProblem {
        dims,
        markov: MarkovLattice {
            states_per_stage: raw.markov.states_per_stage,
            transitions: raw.markov.transitions,
        },
        noise: NoiseModel {
            support_sizes: raw.noise.support_sizes,
            probabilities: raw.noise.probabilities,
        },
        realizations,
        terminal,
        initial_state,
        state_bounds: raw.state_bounds.map(|v| v.iter().map(bound_from_raw).collect()),
        stage_lower_bounds: raw.stage_lower_bounds.unwrap_or_default(),
    })
}

fn parse_value<T: for<'de> Deserialize<'de>>(v: &Value, path: &str) -> Result<T, ModelError> {
    serde_path_to_error::deserialize(v).map_err(|err| {
        let sub = err.path().to_string();
        let full = if sub == "." {
            path.to_string()
        } else if sub.starts_with('[') {
            format!("{path}{sub}")
        } else {
            format!("{path}.{sub}")
        };
        schema(full, err.into_inner().to_string())
    })
}

fn piece(cuts: Vec<RawCut>, rows: Vec<RawStateRow>) -> TerminalPiece {
    TerminalPiece {
        cuts: cuts
            .into_iter()
            .map(|c| AffinePiece {
                alpha: c.alpha,
                beta: c.beta,
            })
            .collect(),
        rows: rows
            .into_iter()
            .map(|r| StateRow {
                ax: r.ax,
                sense: r.sense,
                rhs: r.rhs,
            })
            .collect(),
    }
}

fn terminal_from_raw(raw: &RawTerminal) -> Result<TerminalFunction, ModelError> {
    let pieces = if raw.per_markov {
        let cuts: Vec<Vec<RawCut>> = parse_value(&raw.cuts, "terminal.cuts")?;
        let mut rows: Vec<Vec<RawStateRow>> = match &raw.rows {
            Some(v) => parse_value(v, "terminal.rows")?,
            None => Vec::new(),
        };
        if !rows.is_empty() && rows.len() != cuts.len() {
            return Err(schema(
                "terminal.rows",
                format!("{} row lists for {} cut lists", rows.len(), cuts.len()),
            ));
        }
        rows.resize_with(cuts.len(), Vec::new);
        cuts.into_iter().zip(rows).map(|(c, r)| piece(c, r)).collect()
    } else {
        let cuts: Vec<RawCut> = parse_value(&raw.cuts, "terminal.cuts")?;
        let rows: Vec<RawStateRow> = match &raw.rows {
            Some(v) => parse_value(v, "terminal.rows")?,
            None => Vec::new(),
        };
        vec![piece(cuts, rows)]
    };
    Ok(TerminalFunction {
        per_markov: raw.per_markov,
        pieces,
    })
}

fn to_raw(p: &DhdProblem) -> RawProblem {
    let realizations = p
        .realizations
        .iter()
        .map(|(k, r)| RawRealization {
            t: k.t,
            i: k.i,
            j: k.j,
            e: k.e,
            a: RawMatrix::Nested(r.a.to_rows()),
            bb: Some(RawMatrix::Nested(r.bb.to_rows())),
            ba: Some(RawMatrix::Nested(r.ba.to_rows())),
            w: r.w.clone(),
            cost_x: Some(r.cost_x.clone()),
            cost_b: Some(r.cost_b.clone()),
            cost_a: Some(r.cost_a.clone()),
            rows: r
                .rows
                .iter()
                .map(|row| RawStageRow {
                    ax: Some(row.ax.clone()),
                    ab: Some(row.ab.clone()),
                    aa: Some(row.aa.clone()),
                    sense: row.sense,
                    rhs: row.rhs,
                })
                .collect(),
            bounds_b: Some(r.bounds_b.iter().map(bound_to_raw).collect()),
            bounds_a: Some(r.bounds_a.iter().map(bound_to_raw).collect()),
        })
        .collect();

    let cut_json = |piece: &TerminalPiece| {
        piece
            .cuts
            .iter()
            .map(|c| serde_json::json!({ "alpha": c.alpha, "beta": c.beta }))
            .collect::<Vec<_>>()
    };
    let row_json = |piece: &TerminalPiece| {
        piece
            .rows
            .iter()
            .map(|r| serde_json::json!({ "ax": r.ax, "sense": r.sense, "rhs": r.rhs }))
            .collect::<Vec<_>>()
    };
    let (cuts, rows) = if p.terminal.per_markov {
        (
            Value::from(
                p.terminal
                    .pieces
                    .iter()
                    .map(|x| Value::from(cut_json(x)))
                    .collect::<Vec<_>>(),
            ),
            Value::from(
                p.terminal
                    .pieces
                    .iter()
                    .map(|x| Value::from(row_json(x)))
                    .collect::<Vec<_>>(),
            ),
        )
    } else {
        let first = &p.terminal.pieces[0];
        (Value::from(cut_json(first)), Value::from(row_json(first)))
    };

    RawProblem {
        dims: RawDims {
            t: p.dims.horizon,
            n: p.dims.state_dim,
            mb: p.dims.control_b_dim,
            ma: p.dims.control_a_dim,
        },
        markov: RawMarkov {
            states_per_stage: p.markov.states_per_stage.clone(),
            transitions: p.markov.transitions.clone(),
        },
        noise: RawNoise {
            support_sizes: p.noise.support_sizes.clone(),
            probabilities: p.noise.probabilities.clone(),
        },
        realizations,
        terminal: RawTerminal {
            cuts,
            rows: Some(rows),
            per_markov: p.terminal.per_markov,
        },
        initial_state: match &p.initial_state {
            InitialState::Fixed(x) => RawInitial::Fixed(x.clone()),
            InitialState::Free => RawInitial::Keyword("free".into()),
        },
        state_bounds: p.state_bounds.as_ref().map(|b| b.iter().map(bound_to_raw).collect()),
        stage_lower_bounds: Some(p.stage_lower_bounds.clone()),
    }
}

/// Serializes a problem in the file format read by [`load_problem`].
pub fn to_json(p: &DhdProblem) -> String {
    serde_json::to_string_pretty(&to_raw(p)).expect("problem data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dims": {"T": 1, "N": 1, "Mb": 1, "Ma": 1},
        "markov": {"states_per_stage": [1, 1], "transitions": [[[1.0]]]},
        "noise": {"support_sizes": [1], "probabilities": [[1.0]]},
        "realizations": [
            {"t": 0, "i": 0, "j": 0, "e": 0, "A": [[1]], "Bb": [[1]], "Ba": [[1]], "W": [0],
             "cost_b": [1], "cost_a": [2], "bounds_b": [[0, 5]], "bounds_a": [[0, 5]]}
        ],
        "terminal": {"cuts": [{"alpha": 0, "beta": [0]}, {"alpha": 30, "beta": [-10]}]},
        "initial_state": [0],
        "stage_lower_bounds": [0, 0]
    }"#;

    #[test]
    fn minimal_file_loads_with_defaults() {
        let p = load_problem(MINIMAL.as_bytes()).unwrap();
        assert_eq!(p.markov.states_per_stage, vec![1, 1]);
        assert_eq!(p.noise.support_sizes, vec![1]);
        let r = p.stage_data(0, 0, 0, 0);
        assert_eq!(r.cost_x, vec![0.0]);
        assert_eq!(r.bounds_b, vec![(0.0, 5.0)]);
        assert!(p.state_bounds.is_none());
        assert_eq!(p.terminal.pieces[0].cuts.len(), 2);
    }

    #[test]
    fn flat_matrices_are_accepted() {
        let text = MINIMAL.replace(r#""A": [[1]]"#, r#""A": [1]"#);
        let p = load_problem(text.as_bytes()).unwrap();
        assert_eq!(p.stage_data(0, 0, 0, 0).a.shape(), (1, 1));
    }

    #[test]
    fn bad_transition_row_is_named() {
        let text = MINIMAL.replace("[[[1.0]]]", "[[[0.9]]]");
        match load_problem(text.as_bytes()) {
            Err(ModelError::Schema { path, .. }) => assert!(path.ends_with("transitions[0][0]"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_path_and_line() {
        let text = MINIMAL.replace(r#""T": 1"#, r#""T": "one""#);
        match load_problem(text.as_bytes()) {
            Err(ModelError::Parse { path, line, .. }) => {
                assert_eq!(path, "dims.T");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keyword_for_initial_state() {
        let text = MINIMAL.replace(r#""initial_state": [0]"#, r#""initial_state": "zero""#);
        assert!(matches!(
            load_problem(text.as_bytes()),
            Err(ModelError::Schema { path, .. }) if path == "initial_state"
        ));
    }

    #[test]
    fn round_trip() {
        let p = load_problem(MINIMAL.as_bytes()).unwrap();
        let again = load_problem(to_json(&p).as_bytes()).unwrap();
        assert_eq!(p, again);
    }
}
