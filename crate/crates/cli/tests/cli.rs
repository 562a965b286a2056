use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_collabopt"));
    c.env_remove("COLLABOPT_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/run.toml").to_string_lossy().into_owned()
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["run", "--config", &config(), "--family", "reaching_far", "--seeds", "0,1"];
    let out = bin().args(args).arg("--out").arg(&a).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("| Scenario | Method |"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("| Reaching-far")).count(), 5);
    for f in ["results.csv", "results.json", "results.md", "timings.csv"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let out = bin().args(args).env("COLLABOPT_OUT", &b).output().unwrap();
    assert!(out.status.success());
    let csv_a = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("results.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 2 * 5);
}

#[test]
fn format_flag_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--family", "stationary", "--seeds", "2", "--format", "json"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("results.json").exists());
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn gen_solve_eval_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["gen", "--family", "reaching_near", "--seeds", "0,1", "--out", d]);
    assert!(out.status.success());
    let scenario = dir.path().join("scenarios/reaching_near_1.json");
    assert!(scenario.exists() && dir.path().join("scenarios/reaching_near_0.json").exists());

    let out = run(&["solve", "--family", "reaching_near", "--seeds", "1", "--out", d, "--verbose"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().starts_with("iter "));
    assert!(stdout.contains("converged true"));
    let traj = dir.path().join("solve/reaching_near_1_comoto.traj");

    let out = run(&["eval", "--scenario", scenario.to_str().unwrap(), traj.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    for key in ["\"dst_pct\"", "\"vis_pct\"", "\"legibility\"", "\"nom_dev\""] {
        assert!(line.contains(key));
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["gen", "--family", "juggling"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--seeds", "1,1"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--seeds", "1,2", "--family", "stationary"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two_and_name_the_path() {
    let out = run(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.toml"));

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = bin().args(["gen", "--seeds", "0", "--family", "stationary", "--out"]).arg(blocker.join("sub")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    for sub in ["gen", "run", "eval", "solve"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub));
    }
}
