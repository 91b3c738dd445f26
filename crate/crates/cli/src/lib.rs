//! Command-line front end: solve, verify, simulate and export-cuts.
//!
//! Exit codes: 0 success, 1 verification checks failed, 2 unreadable or
//! invalid input (including a missing cut file), 3 solver error, 4 problem
//! too large for the oracle.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dhd_sddp::cuts::CutStore;
use dhd_sddp::model::{load_problem_file, DhdProblem};
use dhd_sddp::oracle::{verify, OracleError, VerificationReport, VerifyOptions};
use dhd_sddp::sddp::{lower_bound, run_with_store, simulate_policy, SddpConfig, SolveReport, Termination};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ORACLE_CAP: i32 = 4;

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const CUTS_FILE: &str = "cuts.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const VERIFY_FILE: &str = "verify.txt";
pub const SIMULATION_FILE: &str = "simulation.csv";
pub const SIMULATION_SUMMARY_FILE: &str = "simulation_summary.txt";

#[derive(Debug, Parser)]
#[command(
    name = "dhd-sddp",
    version,
    about = "SDDP solver for decision-hazard-decision problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run SDDP and write the convergence log, cuts and a summary.
    Solve(RunArgs),
    /// Solve, then compare against the extensive-form oracle.
    Verify(RunArgs),
    /// Simulate the cut policy from a cut file.
    Simulate(RunArgs),
    /// Solve and write only the cut dump.
    ExportCuts(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Lower-bound stall tolerance.
    #[arg(long, default_value_t = 1e-7, value_parser = nonnegative)]
    pub tol: f64,
    /// Consecutive stalled iterations before stopping.
    #[arg(long, default_value_t = 20, value_parser = positive)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulated paths.
    #[arg(long, default_value_t = 1000, value_parser = positive)]
    pub paths: usize,
    /// Add every backward-pass cut to all Markov states of its stage.
    #[arg(long)]
    pub share_cuts: bool,
    /// Cut file to start from (or to simulate with).
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Fill the wall_ms column of the convergence log.
    #[arg(long)]
    pub timing: bool,
}

fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite nonnegative number, got {s}")),
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s}")),
    }
}

impl RunArgs {
    pub fn config(&self) -> SddpConfig {
        SddpConfig {
            max_iterations: self.iters,
            bound_stall_tolerance: self.tol,
            bound_stall_patience: self.patience,
            seed: self.seed,
            share_cuts_all_states: self.share_cuts,
            ..SddpConfig::default()
        }
    }
}

/// Exit code and the text printed on success.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.text);
            out.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Solve(a) => cmd_solve(a).map(|(_, _, text)| Outcome { code: EXIT_OK, text }),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::ExportCuts(a) => cmd_export_cuts(a),
    }
}

fn load(args: &RunArgs) -> Result<DhdProblem, Failure> {
    load_problem_file(&args.problem).map_err(|e| Failure::input(e.to_string()))
}

fn read_cuts(p: &DhdProblem, path: &Path) -> Result<CutStore, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut store = CutStore::initialize(p);
    store
        .import_json(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(store)
}

fn initial_store(p: &DhdProblem, args: &RunArgs) -> Result<CutStore, Failure> {
    match &args.warm_start {
        Some(path) => read_cuts(p, path),
        None => Ok(CutStore::initialize(p)),
    }
}

fn out_dir(args: &RunArgs) -> Result<&Path, Failure> {
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    Ok(&args.out)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

/// Convergence log. `wall_ms` stays empty unless `timing` so that logs of
/// identical runs are byte-identical.
pub fn convergence_csv(report: &SolveReport, timing: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "lower_bound", "path_cost", "cuts_total", "wall_ms"])
        .expect("in-memory write");
    for r in &report.history {
        let wall = if timing {
            format!("{:.3}", r.wall_ms)
        } else {
            String::new()
        };
        w.write_record([
            r.iteration.to_string(),
            r.lower_bound.to_string(),
            r.path_cost.map(|c| c.to_string()).unwrap_or_default(),
            r.cuts_total.to_string(),
            wall,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    iteration: usize,
    seed: u64,
    rng_state: &'a dhd_sddp::sddp::RngState,
}

fn summary(report: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "termination: {}", report.termination);
    let _ = writeln!(s, "iterations: {}", report.iterations());
    let _ = writeln!(s, "lower bound: {}", report.final_lower_bound());
    let _ = writeln!(s, "cuts: {}", report.store.total());
    s
}

/// Reads `lower bound: <value>` back out of a summary file.
pub fn summary_lower_bound(text: &str) -> Option<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix("lower bound: "))
        .and_then(|v| v.trim().parse().ok())
}

/// Runs SDDP and writes the convergence log, cuts, checkpoint and summary.
pub fn cmd_solve(args: &RunArgs) -> Result<(DhdProblem, SolveReport, String), Failure> {
    let p = load(args)?;
    let store = initial_store(&p, args)?;
    let dir = out_dir(args)?;
    let report = run_with_store(&p, &args.config(), store);
    write(dir, CONVERGENCE_FILE, &convergence_csv(&report, args.timing))?;
    write(dir, CUTS_FILE, &report.store.to_json())?;
    let checkpoint = Checkpoint {
        iteration: report.iterations(),
        seed: args.seed,
        rng_state: &report.rng_state,
    };
    write(
        dir,
        CHECKPOINT_FILE,
        &serde_json::to_string_pretty(&checkpoint).expect("checkpoint serializes"),
    )?;
    let text = summary(&report);
    write(dir, SUMMARY_FILE, &text)?;
    if let Termination::Error(msg) = &report.termination {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: msg.clone(),
        });
    }
    Ok((p, report, text))
}

fn verify_text(r: &VerificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lower bound: {}", r.lower_bound);
    let _ = writeln!(s, "oracle optimum: {}", r.oracle_optimum);
    let _ = writeln!(s, "gap: {:e} ({})", r.gap, if r.gap_ok { "ok" } else { "FAIL" });
    let _ = writeln!(
        s,
        "cut checks: {} pairs on {} grid points ({} outside the domain), {} violations",
        r.cut_pairs_checked,
        r.grid_points_checked,
        r.grid_points_infeasible,
        r.violations.len()
    );
    for v in r.violations.iter().take(10) {
        let _ = writeln!(
            s,
            "  t={} i={} cut {} at {:?}: {} > {}",
            v.t, v.i, v.cut_index, v.x, v.cut_value, v.exact_value
        );
    }
    let _ = writeln!(
        s,
        "hazard-decision optimum: {} (difference {:e}, {})",
        r.hd.hd_optimum,
        r.hd.difference,
        if r.hd_ok { "ok" } else { "FAIL" }
    );
    let _ = writeln!(s, "result: {}", if r.passed() { "PASS" } else { "FAIL" });
    s
}

pub fn cmd_verify(args: &RunArgs) -> Result<Outcome, Failure> {
    let (p, report, solved) = cmd_solve(args)?;
    let checked = verify(&p, &report.store, report.final_lower_bound(), &VerifyOptions::default()).map_err(|e| {
        let code = match e {
            OracleError::TreeTooLarge { .. } => EXIT_ORACLE_CAP,
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    })?;
    let text = verify_text(&checked);
    write(&args.out, VERIFY_FILE, &text)?;
    Ok(Outcome {
        code: if checked.passed() { EXIT_OK } else { EXIT_CHECKS_FAILED },
        text: solved + &text,
    })
}

/// Simulates with the cuts from `--warm-start`, or else from the cut file of
/// an earlier solve in `--out`.
pub fn cmd_simulate(args: &RunArgs) -> Result<Outcome, Failure> {
    let p = load(args)?;
    let cut_path = args.warm_start.clone().unwrap_or_else(|| args.out.join(CUTS_FILE));
    if !cut_path.is_file() {
        return Err(Failure::input(format!("no cut file at {}", cut_path.display())));
    }
    let store = read_cuts(&p, &cut_path)?;
    let dir = out_dir(args)?;
    let solver = |e: dhd_sddp::sddp::SddpError| Failure {
        code: EXIT_SOLVER,
        message: e.to_string(),
    };
    let lb = lower_bound(&p, &store).map_err(solver)?;
    let stats = simulate_policy(&p, &store, args.paths, args.seed, &args.config().stage_options()).map_err(solver)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path_index", "cost"]).expect("in-memory write");
    for (k, c) in stats.costs.iter().enumerate() {
        w.write_record([k.to_string(), c.to_string()]).expect("in-memory write");
    }
    let table = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8");
    write(dir, SIMULATION_FILE, &table)?;
    let mut s = String::new();
    let _ = writeln!(s, "paths: {}", stats.costs.len());
    let _ = writeln!(s, "mean: {}", stats.mean);
    let _ = writeln!(s, "standard error: {}", stats.std_error);
    let _ = writeln!(s, "lower bound: {lb}");
    let _ = writeln!(s, "gap estimate: {}", stats.mean - lb);
    write(dir, SIMULATION_SUMMARY_FILE, &s)?;
    Ok(Outcome { code: EXIT_OK, text: s })
}

pub fn cmd_export_cuts(args: &RunArgs) -> Result<Outcome, Failure> {
    let p = load(args)?;
    let store = initial_store(&p, args)?;
    let dir = out_dir(args)?;
    let report = run_with_store(&p, &args.config(), store);
    if let Termination::Error(msg) = &report.termination {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: msg.clone(),
        });
    }
    write(dir, CUTS_FILE, &report.store.to_json())?;
    let text = format!(
        "lower bound: {}\ncuts: {} written to {}\n",
        report.final_lower_bound(),
        report.store.total(),
        dir.join(CUTS_FILE).display()
    );
    Ok(Outcome { code: EXIT_OK, text })
}
