use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lhs-lab"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

const CONSENSUS_RUN: &str = r#"{
    "model": {"n": 5, "d": 2, "kappa0": 1.0, "tau": 0.05, "form": "sl"},
    "history": {"kind": "generator", "seed": 3, "spread": 0.0},
    "integrator": {"t_end": 1.0},
    "adjudication": {"gate": "sl_complete"}
}"#;

#[test]
fn simulate_writes_artifacts_and_exits_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", CONSENSUS_RUN);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    for name in ["trajectory.csv", "diagnostics.csv", "report.json", "report.txt"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["gate"]["gate"], "sl_complete");
    assert!(stdout_of(&output).contains("verdict=pass"));
}

#[test]
fn simulate_exits_one_when_the_verdict_fails() {
    // Hypotheses hold, but the finite-horizon tolerance is unreachable at
    // t_end = 0.2, so the adjudication honestly fails.
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"n": 5, "d": 2, "kappa0": 1.0, "tau": 0.05, "form": "sl"},
        "history": {"kind": "generator", "seed": 3, "spread": 0.1},
        "integrator": {"t_end": 0.2},
        "adjudication": {"gate": "sl_complete", "complete_tol": 1e-12}
    }"#;
    let config = write_config(dir.path(), "run.json", text);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["gate"]["prediction"]["kind"], "complete_aggregation");
}

#[test]
fn check_prints_the_gate_without_writing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", CONSENSUS_RUN);
    let output = bin()
        .args(["check", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let text = stdout_of(&output);
    assert!(text.contains("gate=sl_complete"), "{text}");
    assert!(text.contains("prediction=complete_aggregation"), "{text}");
    // Only the config file exists; check produced no artifacts.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin()
        .args(["check", "--config", "/nonexistent/run.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let malformed = write_config(dir.path(), "bad.json", "{not json");
    let output = bin()
        .args(["check", "--config"])
        .arg(&malformed)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8(output.stderr).unwrap().contains("parsing"));

    let unknown_field = write_config(
        dir.path(),
        "unknown.json",
        r#"{
            "model": {"n": 3, "d": 2, "kappa0": 1.0, "tau": 0.0, "form": "sl",
                      "bogus": 1},
            "history": {"kind": "generator", "seed": 1, "spread": 0.1}
        }"#,
    );
    let output = bin()
        .args(["check", "--config"])
        .arg(&unknown_field)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_writes_the_table_and_parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "base": {
            "model": {"n": 4, "d": 2, "kappa0": 1.0, "tau": 0.02, "form": "sl"},
            "history": {"kind": "generator", "seed": 1, "spread": 0.1},
            "integrator": {"t_end": 0.3}
        },
        "axes": [{"name": "seed", "values": [1, 2, 3]}]
    }"#;
    let config = write_config(dir.path(), "sweep.json", text);
    let seq_dir = dir.path().join("seq");
    let par_dir = dir.path().join("par");
    let seq = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&seq_dir)
        .output()
        .unwrap();
    assert!(seq.status.success(), "{seq:?}");
    assert!(stdout_of(&seq).contains("rows=3 failed=0 errored=0"));
    let par = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&par_dir)
        .args(["--parallel", "2"])
        .output()
        .unwrap();
    assert!(par.status.success(), "{par:?}");
    let seq_csv = fs::read(seq_dir.join("sweep.csv")).unwrap();
    let par_csv = fs::read(par_dir.join("sweep.csv")).unwrap();
    assert_eq!(seq_csv, par_csv);
    let text = String::from_utf8(seq_csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("index,seed,tau,"));
}

#[test]
fn compare_reduction_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"n": 3, "d": 2, "kappa0": 1.0, "kappa1": 0.2, "tau": 0.0},
        "history": {"kind": "generator", "seed": 4, "spread": 0.3, "real": true},
        "integrator": {"t_end": 0.5}
    }"#;
    let config = write_config(dir.path(), "red.json", text);
    let output = bin()
        .args(["compare-reduction", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert!(report["max_general_vs_real_gap"].as_f64().unwrap() <= 1e-10);
    assert!(report["max_imag_residue"].as_f64().unwrap() <= 1e-10);
    assert!(report["max_real_vs_phase_gap"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn compare_splitting_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"n": 4, "d": 2, "kappa0": 1.0, "kappa1": 0.2, "tau": 0.0,
                  "omega": {"kind": "rotation_2d", "nu": 0.7}},
        "history": {"kind": "generator", "seed": 9, "spread": 0.2},
        "integrator": {"t_end": 0.5}
    }"#;
    let config = write_config(dir.path(), "split.json", text);
    let output = bin()
        .args(["compare-splitting", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert!(report["max_split_gap"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn drift_abort_flushes_partial_artifacts_and_exits_two() {
    // First-order stepping off the sphere trips a vanishing norm budget.
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"n": 3, "d": 2, "kappa0": 1.0, "kappa1": 0.2, "tau": 0.0},
        "history": {"kind": "generator", "seed": 2, "spread": 0.3},
        "integrator": {"t_end": 1.0, "h": 0.02, "scheme": "euler",
                       "norm_budget": 1e-14}
    }"#;
    let config = write_config(dir.path(), "drift.json", text);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    assert!(out_dir.join("trajectory.csv").is_file());
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(report.starts_with("error="), "{report}");
}
