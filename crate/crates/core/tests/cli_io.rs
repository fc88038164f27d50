//! End-to-end checks of the command-line layer: file outputs, manifest
//! reproduction, override precedence, and process exit codes.

use std::fs;
use std::process::Command;

use qfb::cli::{self, ScenarioConfig, ENSEMBLE_HEADER, TRAJECTORY_HEADER};

/// Preset shrunk for fast io tests, with extra overrides applied through the
/// same pair-overlay path the binary uses.
fn tiny(preset: &str, out: &str, extra: &[(&str, &str)]) -> ScenarioConfig {
    let base = cli::preset(preset).unwrap();
    let mut pairs = cli::config_pairs(&cli::emit_config(&base)).unwrap();
    pairs.push(("run.trajectories".into(), "4".into()));
    pairs.push(("integrator.t_end".into(), "0.2".into()));
    pairs.push(("run.out".into(), out.into()));
    for (k, v) in extra {
        pairs.push((k.to_string(), v.to_string()));
    }
    cli::build_config(&pairs).unwrap()
}

#[test]
fn run_writes_ensemble_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let cfg = tiny("fig2a", out.to_str().unwrap(), &[]);
    let summary = cli::run(&cfg).unwrap();

    assert_eq!(summary.ensembles.len(), 1);
    let csv = fs::read_to_string(&summary.ensembles[0].1).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], ENSEMBLE_HEADER);
    // initial sample + one per stride
    assert_eq!(lines.len(), 2 + cfg.integrator.n_steps() / cfg.integrator.record_stride);
    assert!(lines[1].starts_with("0,"));

    let manifest = fs::read_to_string(&summary.manifest).unwrap();
    let back = cli::parse_config(&manifest).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn manifest_rerun_reproduces_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let cfg = tiny("fig2bc", first.to_str().unwrap(), &[]);
    let summary = cli::run(&cfg).unwrap();

    let manifest = fs::read_to_string(&summary.manifest).unwrap();
    let mut pairs = cli::config_pairs(&manifest).unwrap();
    let second = dir.path().join("second");
    pairs.push(("run.out".into(), second.to_str().unwrap().into()));
    let replayed = cli::build_config(&pairs).unwrap();
    cli::run(&replayed).unwrap();

    let a = fs::read(first.join("ensemble.csv")).unwrap();
    let b = fs::read(second.join("ensemble.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn emit_trajectories_writes_one_csv_per_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let cfg = tiny(
        "fig2bc",
        out.to_str().unwrap(),
        &[("run.trajectories", "3"), ("run.emit_trajectories", "true")],
    );
    let summary = cli::run(&cfg).unwrap();
    assert_eq!(summary.trajectory_files.len(), 3);
    for id in 0..3 {
        let text = fs::read_to_string(out.join(format!("traj_{id}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 2 + cfg.integrator.n_steps() / cfg.integrator.record_stride);
    }
}

#[test]
fn paired_comparison_emits_both_legs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pair");
    let cfg = tiny(
        "fig4",
        out.to_str().unwrap(),
        &[("run.trajectories", "2"), ("integrator.t_end", "0.05")],
    );
    let summary = cli::run(&cfg).unwrap();
    let labels: Vec<&str> = summary.ensembles.iter().map(|(l, _)| l.as_str()).collect();
    assert_eq!(labels, vec!["feedback_off", "feedback_on"]);
    assert!(out.join("ensemble_feedback_off.csv").exists());
    assert!(out.join("ensemble_feedback_on.csv").exists());
}

fn qfb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qfb"))
}

#[test]
fn binary_reports_config_errors_with_exit_code_1() {
    let no_args = qfb().output().unwrap();
    assert_eq!(no_args.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_args.stderr).contains("--preset"));

    let bad_preset = qfb().args(["--preset", "fig9"]).output().unwrap();
    assert_eq!(bad_preset.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_preset.stderr).contains("fig9"));

    let bad_set = qfb()
        .args(["--preset", "fig2a", "--set", "feedback.u"])
        .output()
        .unwrap();
    assert_eq!(bad_set.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_set.stderr).contains("KEY=VALUE"));

    let bad_key = qfb()
        .args(["--preset", "fig2a", "--set", "feedback.uu=3"])
        .output()
        .unwrap();
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("feedback.uu"));

    let missing_file = qfb().args(["--config", "/nonexistent.cfg"]).output().unwrap();
    assert_eq!(missing_file.status.code(), Some(1));

    let help = qfb().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn binary_reports_integration_blowup_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    // A step much longer than 1/(chi |alpha|^2) makes the Euler map diverge
    // immediately, so every trajectory fails and the run aborts.
    let out = qfb()
        .args([
            "--preset",
            "fig2a",
            "--trajectories",
            "4",
            "--set",
            "integrator.dt=3",
            "--set",
            "integrator.t_end=30",
            "--out",
            dir.path().join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integration failed"));
}

#[test]
fn binary_reports_unwritable_output_with_exit_code_3() {
    let out = qfb()
        .args(["--preset", "fig2a", "--out", "/dev/null/sub"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn binary_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(format!("w{workers}"));
        let status = qfb()
            .args([
                "--preset",
                "fig2a",
                "--trajectories",
                "8",
                "--seed",
                "5",
                "--set",
                "integrator.t_end=0.2",
                "--out",
                out.to_str().unwrap(),
            ])
            .env("QFB_WORKERS", workers)
            .status()
            .unwrap();
        assert!(status.success());
        bytes.push(fs::read(out.join("ensemble.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn flags_override_env_which_overrides_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prec");
    let status = qfb()
        .args([
            "--preset",
            "fig2a",
            "--trajectories",
            "2",
            "--set",
            "integrator.t_end=0.05",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ])
        .env("QFB_SEED", "7")
        .env("QFB_TRAJECTORIES", "3")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.cfg")).unwrap();
    // --seed beats QFB_SEED; --trajectories beats QFB_TRAJECTORIES.
    assert!(manifest.contains("run.seed = 9"));
    assert!(manifest.contains("run.trajectories = 2"));

    let out2 = dir.path().join("prec2");
    let status = qfb()
        .args([
            "--preset",
            "fig2a",
            "--set",
            "integrator.t_end=0.05",
            "--set",
            "run.trajectories=2",
            "--out",
            out2.to_str().unwrap(),
        ])
        .env("QFB_SEED", "7")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out2.join("manifest.cfg")).unwrap();
    // With no flag, the environment override stands.
    assert!(manifest.contains("run.seed = 7"));
    assert!(manifest.contains("run.trajectories = 2"));
}
