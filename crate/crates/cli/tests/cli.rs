//! End-to-end checks of the command-line interface.

use std::process::Command;

use tempfile::tempdir;

fn sasel() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sasel"))
}

#[test]
fn gen_is_deterministic_per_seed() {
    let a = sasel().args(["gen", "--n", "2", "--seed", "7"]).output().unwrap();
    let b = sasel().args(["gen", "--n", "2", "--seed", "7"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = sasel().args(["gen", "--n", "2", "--seed", "8"]).output().unwrap();
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn solve_and_validate_round_trip() {
    let dir = tempdir().unwrap();
    let model = dir.path().join("net.json");
    let report = dir.path().join("rep.json");
    let traj = dir.path().join("traj.csv");
    assert!(sasel()
        .args(["gen", "--n", "2", "--seed", "1", "-o"])
        .arg(&model)
        .status()
        .unwrap()
        .success());
    assert!(sasel()
        .args(["solve", "--mode", "se", "--min-active", "1", "--model"])
        .arg(&model)
        .arg("-o")
        .arg(&report)
        .status()
        .unwrap()
        .success());
    let out = sasel()
        .args(["validate", "--model"])
        .arg(&model)
        .arg("--report")
        .arg(&report)
        .arg("-o")
        .arg(&traj)
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["diverged"], serde_json::json!(false));
    assert!(summary["ratio"].as_f64().unwrap() <= 1e-3);
    assert!(traj.exists());
}

#[test]
fn certified_infeasible_design_exits_with_code_two() {
    let dir = tempdir().unwrap();
    let model = dir.path().join("net.json");
    assert!(sasel()
        .args(["gen", "--n", "2", "--seed", "1", "-o"])
        .arg(&model)
        .status()
        .unwrap()
        .success());
    let status = sasel()
        .args(["certify", "--sensors", "none", "--model"])
        .arg(&model)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_code_one() {
    let status = sasel()
        .args(["solve", "--model", "/nonexistent/model.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
