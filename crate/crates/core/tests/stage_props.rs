use dhd_sddp::cuts::CutStore;
use dhd_sddp::model::{AffinePiece, DhdProblem, Matrix, TerminalPiece};
use dhd_sddp::sddp::{run, SddpConfig};
use dhd_sddp::stage::{solve_recourse, solve_stage, StageOptions};
use dhd_sddp_testkit::{random_instance, GenOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPTS: StageOptions = StageOptions {
    feasibility_penalty: None,
};

fn trained(seed: u64, iterations: usize) -> (DhdProblem, CutStore) {
    let p = random_instance(seed, &GenOptions::default());
    let cfg = SddpConfig {
        max_iterations: iterations,
        bound_stall_patience: iterations + 1,
        ..SddpConfig::default()
    };
    let store = run(&p, &cfg).store;
    (p, store)
}

fn interior(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.5..9.5)).collect()
}

#[test]
fn subgradient_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..10 {
        let (p, store) = trained(seed, 5);
        for _ in 0..5 {
            let t = rng.random_range(0..p.horizon());
            let i = rng.random_range(0..p.num_markov(t));
            let x = interior(&mut rng, 2);
            let sol = solve_stage(&p, &store, t, i, &x, &OPTS).unwrap();
            for _ in 0..4 {
                let y = interior(&mut rng, 2);
                let other = solve_stage(&p, &store, t, i, &y, &OPTS).unwrap();
                let lin: f64 = sol.value
                    + sol
                        .subgradient
                        .iter()
                        .zip(y.iter().zip(&x))
                        .map(|(g, (a, b))| g * (a - b))
                        .sum::<f64>();
                assert!(other.value >= lin - 1e-7, "seed {seed}: {} < {lin}", other.value);
            }
        }
    }
}

#[test]
fn value_is_expected_stage_cost_plus_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..10 {
        let (p, store) = trained(seed, 4);
        for t in 0..p.horizon() {
            for i in 0..p.num_markov(t) {
                let x = interior(&mut rng, 2);
                let sol = solve_stage(&p, &store, t, i, &x, &OPTS).unwrap();
                let mut total = 0.0;
                for r in &sol.recourse {
                    let data = p.stage_data(t, i, r.j, r.e);
                    let env = store.evaluate(t + 1, r.j, &r.x_next).unwrap();
                    assert!((env - r.epi).abs() < 1e-7);
                    total += r.prob * (data.stage_cost(&x, &sol.u_b, &r.u_a) + env);
                }
                assert!(
                    (total - sol.value).abs() < 1e-7,
                    "seed {seed}: {total} vs {}",
                    sol.value
                );
            }
        }
    }
}

fn without_ub(mut p: DhdProblem) -> DhdProblem {
    p.dims.control_b_dim = 0;
    for r in p.realizations.values_mut() {
        r.bb = Matrix::zeros(p.dims.state_dim, 0);
        r.cost_b.clear();
        r.bounds_b.clear();
        for row in &mut r.rows {
            row.ab.clear();
        }
    }
    p
}

#[test]
fn without_first_stage_control_the_problem_splits_by_scenario() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let p = without_ub(random_instance(seed, &GenOptions::default()));
        let store = CutStore::initialize(&p);
        let x = interior(&mut rng, 2);
        let sol = solve_stage(&p, &store, 0, 0, &x, &OPTS).unwrap();
        let mut split = 0.0;
        for r in &sol.recourse {
            let rec = solve_recourse(&p, &store, 0, 0, (r.j, r.e), &x, &[], &OPTS).unwrap();
            let cost_x: f64 = p
                .stage_data(0, 0, r.j, r.e)
                .cost_x
                .iter()
                .zip(&x)
                .map(|(c, v)| c * v)
                .sum();
            split += r.prob * (cost_x + rec.value);
        }
        assert!((split - sol.value).abs() < 1e-7);
    }
}

#[test]
fn zero_costs_give_zero_value_and_slope() {
    let mut p = random_instance(5, &GenOptions::default());
    for r in p.realizations.values_mut() {
        r.cost_x.iter_mut().for_each(|c| *c = 0.0);
        r.cost_b.iter_mut().for_each(|c| *c = 0.0);
        r.cost_a.iter_mut().for_each(|c| *c = 0.0);
    }
    p.terminal.pieces = vec![TerminalPiece {
        cuts: vec![AffinePiece {
            alpha: 0.0,
            beta: vec![0.0, 0.0],
        }],
        rows: Vec::new(),
    }];
    p.terminal.per_markov = false;
    p.stage_lower_bounds.iter_mut().for_each(|v| *v = 0.0);
    let store = CutStore::initialize(&p);
    let sol = solve_stage(&p, &store, 0, 0, &[5.0, 5.0], &OPTS).unwrap();
    assert!(sol.value.abs() < 1e-12);
    assert!(sol.subgradient.iter().all(|g| g.abs() < 1e-12));
}
