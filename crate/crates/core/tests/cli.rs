//! End-to-end tests of the `evolin` binary: exit codes, output files,
//! and byte-level determinism.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn evolin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evolin"));
    // The tests control the output directory explicitly.
    cmd.env_remove("EVOLIN_OUT");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn parse_report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report.json exists");
    serde_json::from_str(&text).expect("report.json parses")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process not killed by a signal")
}

#[test]
fn run_writes_solution_report_and_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin()
        .args(["run"])
        .arg(fixture("ode_linear.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = parse_report(dir.path());
    assert_eq!(report["scenario"], "ode_linear");
    assert_eq!(report["kind"], "generic");
    assert_eq!(report["routes"], serde_json::json!(["a", "b"]));
    assert_eq!(report["solution_route"], "b");
    assert_eq!(report["agreement"]["passed"], true);
    assert!(report["results"]["a"]["solution_norm"].is_number());
    assert!(report["results"]["b"]["residual_final"].is_number());

    let solution = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(solution.starts_with("t,u0\n"));
    assert_eq!(solution.lines().count(), 902, "header plus one row per grid point");

    let convergence = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(convergence.starts_with("route,lambda,inner_iters,"));
    assert!(convergence.lines().skip(1).all(|l| l.starts_with("a,")));
}

#[test]
fn named_checks_land_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin()
        .args(["run"])
        .arg(fixture("sign_forced.json"))
        .args(["--routes", "b", "--check", "causality,monotonicity"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = parse_report(dir.path());
    let names: Vec<&str> =
        report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["causality_b", "monotonicity"]);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind":"generic","time":{"t0":0,"n":10,"h":0.1}}"#).unwrap();
    let out = evolin().args(["run"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn hypothesis_violations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin()
        .args(["run"])
        .arg(fixture("negative_n.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("positivity"));
}

#[test]
fn unknown_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin()
        .args(["run"])
        .arg(fixture("ode_linear.json"))
        .args(["--check", "bogus"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn convergence_failures_exit_4_and_still_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin()
        .args(["run"])
        .arg(fixture("maxwell_sat.json"))
        .args(["--routes", "a", "--tol", "1e-30"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = parse_report(dir.path());
    assert_eq!(report["error"]["class"], "convergence");
    assert_eq!(report["error"]["exit_code"], 4);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        let out = evolin()
            .args(["run"])
            .arg(fixture("sign_forced.json"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["report.json", "solution.csv", "convergence.csv"] {
        let a = std::fs::read(first.path().join(file)).unwrap();
        let b = std::fs::read(second.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn out_dir_flag_beats_the_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();

    let out = evolin()
        .args(["run"])
        .arg(fixture("sign_step.json"))
        .env("EVOLIN_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.path().join("report.json").exists());

    let out = evolin()
        .args(["run"])
        .arg(fixture("sign_step.json"))
        .env("EVOLIN_OUT", env_dir.path())
        .arg("--out")
        .arg(flag_dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(flag_dir.path().join("report.json").exists());
}

#[test]
fn suite_runs_all_checks_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = evolin().args(["suite"]).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS ").count(), 9, "stdout: {stdout}");
    assert!(!stdout.contains("FAIL "));

    let report = parse_report(dir.path());
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 9);
}
