//! SDDP iterations in control format: a forward pass samples one path of
//! the Markov chain and noise and simulates the current cut policy, then a
//! backward pass adds one cut per visited `(t, i)`.
//!
//! Sampling draws `u ~ U[0, 1)` from ChaCha8 and inverts the cumulative
//! probability vector. Each forward path gets its own generator seeded from
//! the run's master generator, so batched paths can be simulated in
//! parallel and still reproduce bit for bit.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::{Cut, CutError, CutStore};
use crate::lp::{LinearProgram, LpError, LpStatus, Sense};
use crate::model::{dot, DhdProblem, InitialState};
use crate::stage::{solve_recourse, solve_stage, StageError, StageOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SddpError {
    #[error("stage {t}: {source}")]
    Stage { t: usize, source: StageError },
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("initial-state problem: {0}")]
    InitialState(String),
    #[error("initial-state LP: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SddpConfig {
    pub max_iterations: usize,
    pub bound_stall_tolerance: f64,
    pub bound_stall_patience: usize,
    pub seed: u64,
    pub share_cuts_all_states: bool,
    pub forward_paths_per_iteration: usize,
    pub feasibility_penalty: Option<f64>,
}

impl Default for SddpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            bound_stall_tolerance: 1e-7,
            bound_stall_patience: 20,
            seed: 0,
            share_cuts_all_states: false,
            forward_paths_per_iteration: 1,
            feasibility_penalty: None,
        }
    }
}

impl SddpConfig {
    pub fn stage_options(&self) -> StageOptions {
        StageOptions {
            feasibility_penalty: self.feasibility_penalty,
        }
    }
}

/// One simulated path of the cut policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `i_t` for `t = 0..=T`.
    pub markov: Vec<usize>,
    /// `noise[t]` is the outcome drawn on the transition `t -> t+1`.
    pub noise: Vec<usize>,
    /// `X_t` for `t = 0..=T`.
    pub states: Vec<Vec<f64>>,
    /// `U^b_t` for `t = 0..T`.
    pub u_b: Vec<Vec<f64>>,
    /// `u_a[t]` is `U^a_{t+1}`.
    pub u_a: Vec<Vec<f64>>,
    /// Stage costs plus the terminal value at `X_T`.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    MaxIterations,
    BoundStall,
    Error(String),
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::MaxIterations => write!(f, "MaxIterations"),
            Termination::BoundStall => write!(f, "BoundStall"),
            Termination::Error(m) => write!(f, "Error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_bound: f64,
    /// Mean cost of the iteration's forward paths; `None` for the
    /// initialization row.
    pub path_cost: Option<f64>,
    pub cuts_total: usize,
    /// Cuts per stage `0..T`.
    pub cuts_per_stage: Vec<usize>,
    pub wall_ms: f64,
}

/// Generator position, enough to continue a run's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    /// ChaCha word position, as a decimal string in JSON.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub store: CutStore,
    pub config: SddpConfig,
    pub rng_state: RngState,
}

impl SolveReport {
    pub fn final_lower_bound(&self) -> f64 {
        self.history.last().map_or(f64::NEG_INFINITY, |r| r.lower_bound)
    }

    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iteration)
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.lower_bound).collect()
    }
}

/// Index drawn from `probs` by inverting the cumulative sum at `u`.
/// Zero-probability entries are never returned.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// Lower bound of the stage-0 envelope and the initial state achieving it.
pub fn lower_bound_with_state(p: &DhdProblem, store: &CutStore) -> Result<(f64, Vec<f64>), SddpError> {
    match &p.initial_state {
        InitialState::Fixed(x0) => Ok((store.evaluate(0, 0, x0)?, x0.clone())),
        InitialState::Free => {
            let n = p.dims.state_dim;
            let bx = p
                .state_bounds
                .as_ref()
                .ok_or_else(|| SddpError::InitialState("free initial state without state_bounds".into()))?;
            let mut lp = LinearProgram::new();
            let x: Vec<usize> = (0..n)
                .map(|k| lp.add_var(0.0, bx[k].0, bx[k].1, format!("x{k}")))
                .collect();
            let theta = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY, "theta");
            for (q, c) in store.cuts(0, 0)?.iter().enumerate() {
                let mut coeffs = vec![(theta, 1.0)];
                coeffs.extend((0..n).map(|k| (x[k], -c.beta[k])));
                lp.add_row(coeffs, Sense::Ge, c.alpha, format!("cut{q}"));
            }
            let sol = lp.solve()?;
            if sol.status != LpStatus::Optimal {
                return Err(SddpError::InitialState(format!("envelope LP is {:?}", sol.status)));
            }
            let x0: Vec<f64> = x.iter().map(|&k| sol.x[k]).collect();
            // Report the envelope itself so the bound matches `evaluate`.
            Ok((store.evaluate(0, 0, &x0)?, x0))
        }
    }
}

pub fn lower_bound(p: &DhdProblem, store: &CutStore) -> Result<f64, SddpError> {
    lower_bound_with_state(p, store).map(|(v, _)| v)
}

/// Simulates the cut policy along one sampled path.
pub fn forward_pass<R: Rng + ?Sized>(
    p: &DhdProblem,
    store: &CutStore,
    rng: &mut R,
    opts: &StageOptions,
) -> Result<Trajectory, SddpError> {
    let t_max = p.horizon();
    let (_, x0) = lower_bound_with_state(p, store)?;
    let mut traj = Trajectory {
        markov: vec![0],
        noise: Vec::with_capacity(t_max),
        states: vec![x0],
        u_b: Vec::with_capacity(t_max),
        u_a: Vec::with_capacity(t_max),
        cost: 0.0,
    };
    let mut i = 0;
    for t in 0..t_max {
        let x = traj.states[t].clone();
        let sol = solve_stage(p, store, t, i, &x, opts).map_err(|source| SddpError::Stage { t, source })?;
        let j = inverse_cdf(&p.markov.transitions[t][i], rng.random::<f64>());
        let e = inverse_cdf(&p.noise.probabilities[t], rng.random::<f64>());
        let rec = solve_recourse(p, store, t, i, (j, e), &x, &sol.u_b, opts)
            .map_err(|source| SddpError::Stage { t, source })?;
        traj.cost += rec.stage_cost;
        traj.markov.push(j);
        traj.noise.push(e);
        traj.u_b.push(sol.u_b);
        traj.u_a.push(rec.u_a);
        traj.states.push(rec.x_next);
        i = j;
    }
    traj.cost += store.evaluate(t_max, i, &traj.states[t_max])?;
    Ok(traj)
}

/// Adds cuts along the given trajectories, sweeping stages backwards. At
/// each stage all trajectories are handled in order before moving on.
/// Returns the number of new cuts.
pub fn backward_pass(
    p: &DhdProblem,
    store: &mut CutStore,
    trajectories: &[Trajectory],
    iteration: usize,
    share_cuts_all_states: bool,
    opts: &StageOptions,
) -> Result<usize, SddpError> {
    let mut added = 0;
    for t in (0..p.horizon()).rev() {
        for traj in trajectories {
            let x = &traj.states[t];
            let states: Vec<usize> = if share_cuts_all_states {
                (0..p.num_markov(t)).collect()
            } else {
                vec![traj.markov[t]]
            };
            for i in states {
                let sol = solve_stage(p, store, t, i, x, opts).map_err(|source| SddpError::Stage { t, source })?;
                let cut = Cut {
                    alpha: sol.value - dot(&sol.subgradient, x),
                    beta: sol.subgradient,
                    iteration_born: iteration,
                    source_state: Some(x.clone()),
                };
                if store.add_cut(t, i, cut)? {
                    added += 1;
                }
            }
        }
    }
    Ok(added)
}

fn record(
    p: &DhdProblem,
    store: &CutStore,
    iteration: usize,
    lb: f64,
    path_cost: Option<f64>,
    start: Instant,
) -> IterationRecord {
    IterationRecord {
        iteration,
        lower_bound: lb,
        path_cost,
        cuts_total: store.total(),
        cuts_per_stage: (0..p.horizon()).map(|t| store.stage_count(t)).collect(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Runs SDDP from freshly initialized cuts.
pub fn run(p: &DhdProblem, config: &SddpConfig) -> SolveReport {
    run_with_store(p, config, CutStore::initialize(p))
}

/// Runs SDDP starting from `store`, e.g. cuts loaded from a dump.
pub fn run_with_store(p: &DhdProblem, config: &SddpConfig, mut store: CutStore) -> SolveReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let opts = config.stage_options();
    let mut history = Vec::new();
    let rng_state = |rng: &ChaCha8Rng| RngState {
        seed: config.seed,
        word_pos: rng.get_word_pos(),
    };
    let finish = |history, termination, store, rng: &ChaCha8Rng| SolveReport {
        history,
        termination,
        store,
        config: config.clone(),
        rng_state: rng_state(rng),
    };

    let mut lb = match lower_bound(p, &store) {
        Ok(v) => v,
        Err(e) => return finish(history, Termination::Error(e.to_string()), store, &rng),
    };
    history.push(record(p, &store, 0, lb, None, start));

    let paths = config.forward_paths_per_iteration.max(1);
    let mut stalled = 0;
    for k in 1..=config.max_iterations {
        let seeds: Vec<u64> = (0..paths).map(|_| rng.next_u64()).collect();
        let simulate = |&s: &u64| {
            let mut path_rng = ChaCha8Rng::seed_from_u64(s);
            forward_pass(p, &store, &mut path_rng, &opts)
        };
        let forward: Result<Vec<Trajectory>, SddpError> = if paths > 1 {
            seeds.par_iter().map(simulate).collect()
        } else {
            seeds.iter().map(simulate).collect()
        };
        let trajs = match forward {
            Ok(t) => t,
            Err(e) => return finish(history, Termination::Error(e.to_string()), store, &rng),
        };
        if let Err(e) = backward_pass(p, &mut store, &trajs, k, config.share_cuts_all_states, &opts) {
            return finish(history, Termination::Error(e.to_string()), store, &rng);
        }
        let new_lb = match lower_bound(p, &store) {
            Ok(v) => v,
            Err(e) => return finish(history, Termination::Error(e.to_string()), store, &rng),
        };
        let path_cost = trajs.iter().map(|t| t.cost).sum::<f64>() / trajs.len() as f64;
        history.push(record(p, &store, k, new_lb, Some(path_cost), start));

        if new_lb - lb < config.bound_stall_tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        lb = new_lb;
        if config.bound_stall_patience > 0 && stalled >= config.bound_stall_patience {
            return finish(history, Termination::BoundStall, store, &rng);
        }
    }
    finish(history, Termination::MaxIterations, store, &rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub mean: f64,
    pub std_error: f64,
    pub costs: Vec<f64>,
}

/// Monte Carlo estimate of the expected cost of the cut policy. No cuts
/// are added.
pub fn simulate_policy(
    p: &DhdProblem,
    store: &CutStore,
    n_paths: usize,
    seed: u64,
    opts: &StageOptions,
) -> Result<SimulationStats, SddpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n_paths.max(1)).map(|_| rng.next_u64()).collect();
    let costs: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let mut path_rng = ChaCha8Rng::seed_from_u64(s);
            forward_pass(p, store, &mut path_rng, opts).map(|t| t.cost)
        })
        .collect::<Result<_, _>>()?;
    // Welford's recurrence; identical costs give exactly zero variance.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &c) in costs.iter().enumerate() {
        let delta = c - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (c - mean);
    }
    let n = costs.len() as f64;
    let std_error = if costs.len() > 1 {
        (m2 / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(SimulationStats { mean, std_error, costs })
}
