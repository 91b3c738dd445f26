use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dhd_sddp::model::to_json;
use dhd_sddp_cli::{main_with, summary_lower_bound, CONVERGENCE_FILE, CUTS_FILE, SIMULATION_FILE, SUMMARY_FILE};
use dhd_sddp_testkit::{random_instance, GenOptions};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("dhd-sddp").chain(args.iter().copied()))
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn write_instance(dir: &Path, seed: u64, opts: &GenOptions) -> String {
    let path = dir.join(format!("instance{seed}.json"));
    fs::write(&path, to_json(&random_instance(seed, opts))).unwrap();
    s(&path)
}

#[test]
fn det1_summary_reports_three() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        cli(&["solve", "--problem", &fixture("det1.json"), "--out", &s(tmp.path())]),
        0
    );
    let text = fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap();
    assert!((summary_lower_bound(&text).unwrap() - 3.0).abs() <= 1e-6);
    assert!(text.contains("termination: BoundStall"));
}

#[test]
fn zero_iterations_give_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    assert_eq!(
        cli(&[
            "solve",
            "--problem",
            &fixture("stoch2.json"),
            "--out",
            &out,
            "--iters",
            "0"
        ]),
        0
    );
    let csv = fs::read_to_string(tmp.path().join(CONVERGENCE_FILE)).unwrap();
    assert_eq!(
        csv.lines().collect::<Vec<_>>(),
        ["iteration,lower_bound,path_cost,cuts_total,wall_ms", "0,0,,1,"]
    );
}

#[test]
fn input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    assert_eq!(cli(&["solve", "--problem", "/no/such/file.json", "--out", &out]), 2);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"dims": {"T": 1}}"#).unwrap();
    assert_eq!(cli(&["solve", "--problem", &s(&bad), "--out", &out]), 2);
    // no solve has written cuts here yet
    assert_eq!(
        cli(&[
            "simulate",
            "--problem",
            &fixture("det1.json"),
            "--out",
            &s(&tmp.path().join("empty"))
        ]),
        2
    );
    assert_eq!(
        cli(&["solve", "--problem", &fixture("det1.json"), "--patience", "0"]),
        2
    );
}

#[test]
fn bad_warm_start_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cuts = tmp.path().join("cuts.json");
    fs::write(
        &cuts,
        r#"[{"t": 0, "i": 0, "alpha": 1.0, "beta": [1.0, 2.0], "iteration_born": 1, "source_state": null}]"#,
    )
    .unwrap();
    let out = s(tmp.path());
    assert_eq!(
        cli(&[
            "solve",
            "--problem",
            &fixture("det1.json"),
            "--out",
            &out,
            "--warm-start",
            &s(&cuts)
        ]),
        2
    );
}

#[test]
fn export_then_warm_start_reproduces_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = write_instance(tmp.path(), 20, &GenOptions::default());
    let exported = tmp.path().join("exported");
    assert_eq!(
        cli(&[
            "export-cuts",
            "--problem",
            &problem,
            "--out",
            &s(&exported),
            "--iters",
            "15"
        ]),
        0
    );
    let first = tmp.path().join("first");
    assert_eq!(
        cli(&["solve", "--problem", &problem, "--out", &s(&first), "--iters", "15"]),
        0
    );
    let lb = summary_lower_bound(&fs::read_to_string(first.join(SUMMARY_FILE)).unwrap()).unwrap();

    let again = tmp.path().join("again");
    let cuts = s(&exported.join(CUTS_FILE));
    assert_eq!(
        cli(&[
            "solve",
            "--problem",
            &problem,
            "--out",
            &s(&again),
            "--iters",
            "0",
            "--warm-start",
            &cuts
        ]),
        0
    );
    let warm = summary_lower_bound(&fs::read_to_string(again.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(warm.to_bits(), lb.to_bits());
}

#[test]
fn simulation_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    let det1 = fixture("det1.json");
    assert_eq!(cli(&["solve", "--problem", &det1, "--out", &out]), 0);
    assert_eq!(cli(&["simulate", "--problem", &det1, "--out", &out, "--paths", "1"]), 0);
    let csv = fs::read_to_string(tmp.path().join(SIMULATION_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(
        cli(&["simulate", "--problem", &det1, "--out", &out, "--paths", "50"]),
        0
    );
    let summary = fs::read_to_string(tmp.path().join("simulation_summary.txt")).unwrap();
    assert!(summary.contains("standard error: 0\n"), "{summary}");
    assert!(summary.contains("mean: 3\n"));
}

#[test]
fn verify_fixtures() {
    for name in ["det1.json", "stoch2.json"] {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(
            cli(&["verify", "--problem", &fixture(name), "--out", &s(tmp.path())]),
            0,
            "{name}"
        );
    }
}

#[test]
fn oracle_cap_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = GenOptions {
        horizon: Some(10),
        ..GenOptions::default()
    };
    let problem = (0..)
        .map(|seed| random_instance(seed, &opts))
        .find(|p| {
            let nodes = dhd_sddp::oracle::count_nodes(p, 0, 0, p.horizon());
            nodes > 1e5
        })
        .unwrap();
    let path = tmp.path().join("big.json");
    fs::write(&path, to_json(&problem)).unwrap();
    let out = s(&tmp.path().join("out"));
    assert_eq!(
        cli(&["verify", "--problem", &s(&path), "--out", &out, "--iters", "1"]),
        4
    );
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_dhd-sddp");
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["solve", "--problem", "/missing.json", "--out", &s(tmp.path())])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["verify", "--problem", &fixture("det1.json"), "--out", &s(tmp.path())])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
}
