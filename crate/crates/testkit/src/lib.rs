//! Seeded random instances with relatively complete recourse.
//!
//! Every instance lives in the box `[0, 10]^N` with `Mb = Ma = 1`,
//! `U^b ∈ [0, 3]` and `U^a ∈ [0, 8]`. The offsets `W` are drawn so that
//! `U^a = 4` keeps the next state inside the box for every state in the box
//! and every admissible `U^b`, and every stage row is satisfied at
//! `U^a = 4`. Hence each stage subproblem is feasible from anywhere in the
//! box.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use dhd_sddp::lp::Sense;
use dhd_sddp::model::{
    AffinePiece, DhdProblem, Dims, InitialState, MarkovLattice, Matrix, NoiseModel, RealizationKey, StageRealization,
    StageRow, TerminalFunction, TerminalPiece,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BOX_HI: f64 = 10.0;
const UB_HI: f64 = 3.0;
const UA_HI: f64 = 8.0;
const UA_SAFE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub state_dim: usize,
    /// Drawn from `{2, 3}` when `None`.
    pub horizon: Option<usize>,
    pub max_markov: usize,
    pub max_noise: usize,
    /// Drawn with probability 0.2 when `None`.
    pub free_initial: Option<bool>,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            state_dim: 2,
            horizon: None,
            max_markov: 2,
            max_noise: 2,
            free_initial: None,
        }
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn prob_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    match len {
        1 => vec![1.0],
        _ => {
            let mut v: Vec<f64> = (0..len - 1)
                .map(|_| round2(rng.random_range(0.1..0.9) / (len - 1) as f64))
                .collect();
            let rest = 1.0 - v.iter().sum::<f64>();
            v.push(round2(rest));
            let drift = 1.0 - v.iter().sum::<f64>();
            v[0] += drift;
            v
        }
    }
}

fn realization(rng: &mut ChaCha8Rng, n: usize) -> StageRealization {
    let mut a = Matrix::zeros(n, n);
    let mut bb = Matrix::zeros(n, 1);
    let mut ba = Matrix::zeros(n, 1);
    let mut w = vec![0.0; n];
    for r in 0..n {
        let mut row_sum = 0.0;
        for c in 0..n {
            let v = if r == c {
                rng.random_range(0.2..0.6)
            } else {
                rng.random_range(0.0..0.05 / n as f64)
            };
            a.set(r, c, v);
            row_sum += v;
        }
        let b = rng.random_range(0.0..1.0);
        let s = rng.random_range(0.2..0.6);
        bb.set(r, 0, b);
        ba.set(r, 0, s);
        // With U^a = 4 the next coordinate spans [W + 4s, W + 4s + span].
        let span = BOX_HI * row_sum + UB_HI * b;
        let offset = rng.random_range(0.0..(BOX_HI - span));
        w[r] = offset - UA_SAFE * s;
    }
    let worst_x = 0.05 * BOX_HI * n as f64;
    let demand = StageRow {
        ax: (0..n).map(|_| -rng.random_range(0.0..0.05)).collect(),
        ab: vec![1.0],
        aa: vec![1.0],
        sense: Sense::Ge,
        rhs: rng.random_range(0.5..(UA_SAFE - worst_x).max(0.6)),
    };
    let capacity = StageRow {
        ax: vec![0.0; n],
        ab: vec![1.0],
        aa: vec![1.0],
        sense: Sense::Le,
        rhs: rng.random_range(7.5..10.0),
    };
    StageRealization {
        a,
        bb,
        ba,
        w,
        cost_x: (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
        cost_b: vec![rng.random_range(0.5..2.0)],
        cost_a: vec![rng.random_range(0.5..3.0)],
        rows: vec![demand, capacity],
        bounds_b: vec![(0.0, UB_HI)],
        bounds_a: vec![(0.0, UA_HI)],
    }
}

fn box_min(alpha: f64, beta: &[f64]) -> f64 {
    alpha + beta.iter().map(|&b| (b * BOX_HI).min(0.0)).sum::<f64>()
}

fn stage_cost_min(r: &StageRealization) -> f64 {
    box_min(0.0, &r.cost_x) + (r.cost_b[0] * UB_HI).min(0.0) + (r.cost_a[0] * UA_HI).min(0.0)
}

/// Random instance for `seed`; the same seed always yields the same instance.
pub fn random_instance(seed: u64, opts: &GenOptions) -> DhdProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = opts.state_dim;
    let horizon = opts.horizon.unwrap_or_else(|| rng.random_range(2..=3));
    let dims = Dims {
        horizon,
        state_dim: n,
        control_b_dim: 1,
        control_a_dim: 1,
    };
    let mut states_per_stage = vec![1];
    for _ in 0..horizon {
        states_per_stage.push(rng.random_range(1..=opts.max_markov.max(1)));
    }
    let transitions: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|t| {
            (0..states_per_stage[t])
                .map(|_| prob_vector(&mut rng, states_per_stage[t + 1]))
                .collect()
        })
        .collect();
    let support_sizes: Vec<usize> = (0..horizon)
        .map(|_| rng.random_range(1..=opts.max_noise.max(1)))
        .collect();
    let probabilities = support_sizes.iter().map(|&e| prob_vector(&mut rng, e)).collect();

    let mut realizations = BTreeMap::new();
    for t in 0..horizon {
        for i in 0..states_per_stage[t] {
            for j in 0..states_per_stage[t + 1] {
                for e in 0..support_sizes[t] {
                    realizations.insert(RealizationKey { t, i, j, e }, realization(&mut rng, n));
                }
            }
        }
    }

    let per_markov = states_per_stage[horizon] > 1 && rng.random_bool(0.5);
    let pieces = (0..if per_markov { states_per_stage[horizon] } else { 1 })
        .map(|_| TerminalPiece {
            cuts: (0..rng.random_range(2..=3))
                .map(|_| AffinePiece {
                    alpha: rng.random_range(0.0..10.0),
                    beta: (0..n).map(|_| rng.random_range(-2.0..1.0)).collect(),
                })
                .collect(),
            rows: Vec::new(),
        })
        .collect::<Vec<_>>();

    let mut lbs = vec![0.0; horizon + 1];
    lbs[horizon] = pieces
        .iter()
        .map(|pc| {
            pc.cuts
                .iter()
                .map(|c| box_min(c.alpha, &c.beta))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
        .floor()
        - 1.0;
    for t in (0..horizon).rev() {
        let stage_min = realizations
            .iter()
            .filter(|(k, _)| k.t == t)
            .map(|(_, r)| stage_cost_min(r))
            .fold(f64::INFINITY, f64::min);
        lbs[t] = (stage_min + lbs[t + 1]).floor() - 1.0;
    }

    let free = opts.free_initial.unwrap_or_else(|| rng.random_bool(0.2));
    let initial_state = if free {
        InitialState::Free
    } else {
        InitialState::Fixed((0..n).map(|_| round2(rng.random_range(1.0..9.0))).collect())
    };

    DhdProblem {
        dims,
        markov: MarkovLattice {
            states_per_stage,
            transitions,
        },
        noise: NoiseModel {
            support_sizes,
            probabilities,
        },
        realizations,
        terminal: TerminalFunction { per_markov, pieces },
        initial_state,
        state_bounds: Some(vec![(0.0, BOX_HI); n]),
        stage_lower_bounds: lbs,
    }
}
