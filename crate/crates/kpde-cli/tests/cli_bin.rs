//! Exit-code contract of the installed binary: 0 all-pass, 1 check failure,
//! 2 configuration error, 3 runtime error.

use std::io::Write;
use std::process::Command;

fn kpde() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpde"))
}

#[test]
fn run_preset_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let status = kpde()
        .args(["run", "--preset", "mc-linear-gaussian", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("check_mc_probes.csv").exists());
}

#[test]
fn missing_config_exits_two() {
    let status = kpde().arg("run").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_key_exits_two() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(br#"{"preset": "example-sec4", "potental": 1}"#)
        .unwrap();
    f.flush().unwrap();
    let status = kpde()
        .args(["run", "--config"])
        .arg(f.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    // consistency against an impossible tail tolerance
    let mut config = kpde_cli::config::preset_config("consistency-cos").unwrap();
    config.verification.thresholds.tail_tolerance = 1e-30;
    let dir = tempfile::tempdir().unwrap();
    config.output.directory = dir.path().display().to_string();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(serde_json::to_string(&config).unwrap().as_bytes())
        .unwrap();
    f.flush().unwrap();
    let status = kpde()
        .args(["verify", "--config"])
        .arg(f.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn verify_subset_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let status = kpde()
        .args([
            "verify",
            "--preset",
            "consistency-cos",
            "--check",
            "consistent",
            "--seed",
            "7",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["numeric"]["config"]["verification"]["seed"], 7);
}

#[test]
fn unwritable_output_exits_three() {
    let status = kpde()
        .args([
            "run",
            "--preset",
            "mc-linear-gaussian",
            "--out",
            "/dev/null/impossible",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn regularize_subcommand_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let status = kpde()
        .args(["regularize", "--preset", "example-sec4", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("regularization_trace.csv").exists());
    assert!(dir.path().join("q_eps_4.csv").exists());
}

#[test]
fn solve_det_needs_eps_for_delta() {
    let dir = tempfile::tempdir().unwrap();
    let status = kpde()
        .args(["solve-det", "--preset", "example-sec4", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = kpde()
        .args(["solve-det", "--preset", "example-sec4", "--eps", "0.25", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("norm_trace.csv").exists());
}
