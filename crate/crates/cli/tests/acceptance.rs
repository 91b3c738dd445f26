//! Acceptance criteria, one PASS/FAIL line each. Tolerances are pinned here.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dhd_sddp::cuts::CutStore;
use dhd_sddp::lp::brute_force::{brute_force_optimum, random_boxed_lp};
use dhd_sddp::lp::{check_certificate, LpStatus};
use dhd_sddp::model::{load_problem_file, to_json, DhdProblem};
use dhd_sddp::oracle::{check_hd_reformulation, exact_value, extensive_optimum, DEFAULT_NONZERO_CAP};
use dhd_sddp::sddp::{forward_pass, run, SddpConfig};
use dhd_sddp::stage::{solve_stage, StageOptions};
use dhd_sddp_cli::{
    execute, summary_lower_bound, Command, RunArgs, CONVERGENCE_FILE, CUTS_FILE, SUMMARY_FILE, VERIFY_FILE,
};
use dhd_sddp_testkit::{random_instance, GenOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: usize = DEFAULT_NONZERO_CAP;
const GAP_TOL: f64 = 1e-5;
const CUT_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-9;
const SUBGRADIENT_TOL: f64 = 1e-6;
const HD_TOL: f64 = 1e-7;
const ENVELOPE_TOL: f64 = 1e-5;
const FIXTURE_TOL: f64 = 1e-6;
const LP_TOL: f64 = 1e-8;
const ITERATION_LIMIT: usize = 300;
const RUNTIME_LIMIT_S: f64 = 60.0;
const FIXTURE_LIMIT_S: f64 = 1.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn args(problem: &Path, out: &Path, extra: impl FnOnce(&mut RunArgs)) -> RunArgs {
    let mut a = RunArgs {
        problem: problem.to_path_buf(),
        out: out.to_path_buf(),
        iters: 200,
        tol: 1e-7,
        patience: 20,
        seed: 0,
        paths: 1000,
        share_cuts: false,
        warm_start: None,
        timing: false,
    };
    extra(&mut a);
    a
}

/// Full iteration budget: the stall rule is switched off.
fn full_budget(a: &mut RunArgs) {
    a.iters = ITERATION_LIMIT;
    a.patience = ITERATION_LIMIT;
}

fn write_problem(dir: &Path, name: &str, p: &DhdProblem) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, to_json(p)).unwrap();
    path
}

fn field<'a>(text: &'a str, prefix: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(prefix)).unwrap_or("")
}

fn lower_bounds(csv_path: &Path) -> Vec<f64> {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

/// Criteria 1 and 2 share the verify runs; every convergence log goes to
/// `logs` for criterion 3.
fn oracle_runs(tmp: &Path, logs: &mut Vec<PathBuf>) -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut passed = 0;
    let mut worst_gap: f64 = 0.0;
    let mut max_iters = 0;
    let mut violations = 0usize;
    let mut pairs = 0usize;
    let mut failures = Vec::new();
    for seed in 0..25u64 {
        let p = random_instance(seed, &GenOptions::default());
        let problem = write_problem(tmp, &format!("oracle{seed}.json"), &p);
        let out = tmp.join(format!("oracle{seed}"));
        let outcome = execute(&Command::Verify(args(&problem, &out, full_budget)));
        let report = fs::read_to_string(out.join(VERIFY_FILE)).unwrap_or_default();
        let summary = fs::read_to_string(out.join(SUMMARY_FILE)).unwrap_or_default();
        logs.push(out.join(CONVERGENCE_FILE));
        let opt: f64 = field(&report, "oracle optimum: ").parse().unwrap_or(f64::NAN);
        let gap: f64 = field(&report, "gap: ")
            .split(' ')
            .next()
            .unwrap_or("")
            .parse()
            .unwrap_or(f64::NAN);
        let rel = gap / (1.0 + opt.abs());
        worst_gap = if rel.is_nan() { f64::NAN } else { worst_gap.max(rel) };
        max_iters = max_iters.max(field(&summary, "iterations: ").parse().unwrap_or(usize::MAX));
        let checks = field(&report, "cut checks: ");
        let words: Vec<&str> = checks.split_whitespace().collect();
        pairs += words.first().and_then(|w| w.parse().ok()).unwrap_or(0);
        violations += words
            .iter()
            .rev()
            .nth(1)
            .and_then(|w| w.parse().ok())
            .unwrap_or(usize::MAX / 64);
        match outcome {
            Ok(o) if o.code == 0 && rel <= GAP_TOL => passed += 1,
            Ok(o) => failures.push(format!("seed {seed} exit {}", o.code)),
            Err(f) => failures.push(format!("seed {seed} exit {}: {}", f.code, f.message)),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let c1 =
        verdict(
            passed == 25 && secs < RUNTIME_LIMIT_S && max_iters <= ITERATION_LIMIT,
            format!(
            "oracle convergence: {passed}/25 verified, max |LB - opt|/(1+|opt|) = {worst_gap:.1e} (tol {GAP_TOL:e}), \
             max iterations {max_iters} (limit {ITERATION_LIMIT}), {secs:.1} s (limit {RUNTIME_LIMIT_S} s){}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
        );
    let c2 = verdict(
        violations == 0 && pairs > 0,
        format!("cut validity: {violations} violations over {pairs} (cut, grid point) pairs (tol {CUT_TOL:e})"),
    );
    (c1, c2)
}

fn monotone(logs: &[PathBuf]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for log in logs {
        let lbs = lower_bounds(log);
        rows += lbs.len();
        for w in lbs.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    verdict(
        worst <= MONOTONE_TOL && !logs.is_empty(),
        format!(
            "monotone bounds: {} logs, {rows} rows, largest decrease {worst:.1e} (tol {MONOTONE_TOL:e})",
            logs.len()
        ),
    )
}

fn subgradients() -> Verdict {
    let opts = StageOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tuples = 0;
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for seed in 400..420u64 {
        let p = random_instance(seed, &GenOptions::default());
        let cfg = SddpConfig {
            max_iterations: 8,
            ..SddpConfig::default()
        };
        let store = run(&p, &cfg).store;
        for _ in 0..10 {
            tuples += 1;
            let t = rng.random_range(0..p.horizon());
            let i = rng.random_range(0..p.num_markov(t));
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(1.0..9.0)).collect();
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let d = [angle.cos(), angle.sin()];
            let base = solve_stage(&p, &store, t, i, &x, &opts).unwrap();
            let slope: f64 = base.subgradient.iter().zip(&d).map(|(v, di)| v * di).sum();
            for h in [1e-2, 1e-4] {
                let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + h * di).collect();
                let moved = solve_stage(&p, &store, t, i, &y, &opts).unwrap();
                let margin = moved.value - (base.value + h * slope);
                worst = worst.min(margin);
                if margin < -SUBGRADIENT_TOL {
                    failures += 1;
                }
            }
        }
    }
    verdict(
        failures == 0 && tuples == 200,
        format!(
            "subgradient soundness: {failures} failures over {tuples} tuples x 2 step sizes, \
             smallest margin {worst:.1e} (tol -{SUBGRADIENT_TOL:e})"
        ),
    )
}

fn hazard_decision() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut slope_ok = true;
    for seed in 500..520u64 {
        let p = random_instance(seed, &GenOptions::default());
        worst = worst.max(check_hd_reformulation(&p, CAP).unwrap().difference);
        let report = run(
            &p,
            &SddpConfig {
                max_iterations: 10,
                ..SddpConfig::default()
            },
        );
        slope_ok &= report.store.state_dim() == p.dims.state_dim
            && report.store.records().iter().all(|r| r.beta.len() == p.dims.state_dim);
    }
    verdict(
        worst <= HD_TOL && slope_ok,
        format!(
            "hazard-decision equivalence: 20 instances, max |DHD - HD| = {worst:.1e} (tol {HD_TOL:e}); \
             cut slopes have dimension N: {slope_ok}"
        ),
    )
}

fn single_markov(tmp: &Path, logs: &mut Vec<PathBuf>) -> Verdict {
    let opts = GenOptions {
        max_markov: 1,
        ..GenOptions::default()
    };
    let mut worst: f64 = 0.0;
    let mut sampled = 0;
    let mut one_list = true;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for seed in 600..605u64 {
        let p = random_instance(seed, &opts);
        let problem = write_problem(tmp, &format!("markov{seed}.json"), &p);
        let out = tmp.join(format!("markov{seed}"));
        execute(&Command::Solve(args(&problem, &out, full_budget))).unwrap();
        logs.push(out.join(CONVERGENCE_FILE));
        let mut store = CutStore::initialize(&p);
        store
            .import_json(&fs::read_to_string(out.join(CUTS_FILE)).unwrap())
            .unwrap();
        one_list &= (0..p.horizon()).all(|t| store.num_states(t) == 1);
        let mut states = Vec::new();
        while states.len() < 50 {
            let traj = forward_pass(&p, &store, &mut rng, &StageOptions::default()).unwrap();
            for t in 0..p.horizon() {
                states.push((t, traj.states[t].clone()));
            }
        }
        states.truncate(50);
        for (t, x) in states {
            let env = store.evaluate(t, 0, &x).unwrap();
            let exact = exact_value(&p, t, 0, &x, CAP).unwrap();
            worst = worst.max((env - exact).abs());
            sampled += 1;
        }
    }
    verdict(
        worst <= ENVELOPE_TOL && one_list,
        format!(
            "scenario dimensionality: 5 single-state instances, one cut list per stage: {one_list}, \
             max |envelope - exact| = {worst:.1e} over {sampled} sampled states (tol {ENVELOPE_TOL:e})"
        ),
    )
}

fn fixtures(tmp: &Path, logs: &mut Vec<PathBuf>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expected) in [("det1.json", 3.0), ("stoch2.json", 1.0)] {
        let start = Instant::now();
        let p = load_problem_file(fixture(name)).unwrap();
        let opt = extensive_optimum(&p, CAP).unwrap();
        let out = tmp.join(name.trim_end_matches(".json"));
        let solved = execute(&Command::Solve(args(&fixture(name), &out, |_| {}))).is_ok();
        let secs = start.elapsed().as_secs_f64();
        logs.push(out.join(CONVERGENCE_FILE));
        let lb =
            summary_lower_bound(&fs::read_to_string(out.join(SUMMARY_FILE)).unwrap_or_default()).unwrap_or(f64::NAN);
        let ok = solved
            && (opt - expected).abs() <= FIXTURE_TOL
            && (lb - opt).abs() <= FIXTURE_TOL
            && secs < FIXTURE_LIMIT_S;
        pass &= ok;
        parts.push(format!("{name} oracle {opt} SDDP {lb} in {secs:.3} s"));
    }
    verdict(
        pass,
        format!(
            "fixtures: {} (tol {FIXTURE_TOL:e}, limit {FIXTURE_LIMIT_S} s each)",
            parts.join("; ")
        ),
    )
}

fn lp_core() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let mut certificate_failures = 0;
    let mut optimal = 0;
    let mut infeasible = 0;
    for _ in 0..1000 {
        let lp = random_boxed_lp(&mut rng, 8, 6);
        let sol = lp.solve().unwrap();
        match (sol.status, brute_force_optimum(&lp)) {
            (LpStatus::Optimal, Some(v)) => {
                optimal += 1;
                if (sol.objective - v).abs() > LP_TOL * (1.0 + v.abs()) {
                    mismatches += 1;
                }
                if !check_certificate(&lp, &sol).is_empty() {
                    certificate_failures += 1;
                }
            }
            (LpStatus::Infeasible, None) => infeasible += 1,
            _ => mismatches += 1,
        }
    }
    verdict(
        mismatches == 0 && certificate_failures == 0,
        format!(
            "LP core: 1000 random LPs ({optimal} optimal, {infeasible} infeasible), {mismatches} mismatches against \
             enumeration (tol {LP_TOL:e} relative to 1+|opt|), {certificate_failures} certificate failures"
        ),
    )
}

fn determinism(tmp: &Path, logs: &mut Vec<PathBuf>) -> Verdict {
    let p = random_instance(7, &GenOptions::default());
    let problem = write_problem(tmp, "determinism.json", &p);
    let mut contents = Vec::new();
    for run in 0..3 {
        let out = tmp.join(format!("determinism{run}"));
        execute(&Command::Solve(args(&problem, &out, |_| {}))).unwrap();
        logs.push(out.join(CONVERGENCE_FILE));
        contents.push(fs::read(out.join(CONVERGENCE_FILE)).unwrap());
    }
    let same = contents.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same,
        format!(
            "determinism: 3 solve runs, convergence logs byte-identical: {same} ({} bytes)",
            contents[0].len()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut logs = Vec::new();
    let (c1, c2) = oracle_runs(dir, &mut logs);
    let c4 = subgradients();
    let c5 = hazard_decision();
    let c6 = single_markov(dir, &mut logs);
    let c7 = fixtures(dir, &mut logs);
    let c8 = lp_core();
    let c9 = determinism(dir, &mut logs);
    let c3 = monotone(&logs);
    let all = [c1, c2, c3, c4, c5, c6, c7, c8, c9];
    for (k, v) in all.iter().enumerate() {
        println!("{} [{}] {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
    }
    if all.iter().any(|v| !v.pass) {
        std::process::exit(1);
    }
}
