//! CLI contract tests: flags, exit codes, file formats.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spindle")
}

#[test]
fn simulate_writes_exact_record_count() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(bin())
        .args(["simulate", "--epsilon", "0.5", "--x", "1", "--t", "1", "--reps", "500", "--seed", "7", "--out", "out.jsonl"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 500);
    // every record parses and carries the contract fields
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["stream_id", "alive", "extinct", "log_v_core", "branch_events"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
    let manifest = std::fs::read_to_string(dir.path().join("out.jsonl.manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(m["master_seed"], 7);
    assert!(m["tool_version"].is_string());
    assert!(m["config"]["epsilon"].as_f64().unwrap() == 0.5);
}

#[test]
fn invalid_epsilon_is_validation_exit_and_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(bin())
        .args(["simulate", "--epsilon", "1.5", "--x", "1", "--t", "1", "--reps", "10", "--out", "out.jsonl"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(!dir.path().join("out.jsonl").exists());
}

#[test]
fn spine_missing_t_is_usage_error() {
    let st = Command::new(bin())
        .args(["spine", "--epsilon", "0.5", "--x", "1", "--reps", "10"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn spine_summary_has_keps_ci_and_endpoint_note() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(bin())
        .args(["spine", "--epsilon", "0.5", "--x", "1", "--t", "2", "--reps", "200", "--seed", "7", "--out", "sp.jsonl"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("sp.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(m["summary"]["estimate"].as_f64().unwrap() > 0.0);
    assert!(m["summary"]["half_width"].as_f64().unwrap() > 0.0);
    assert!(m["summary"]["manifest"]["notes"].as_str().unwrap().contains("free spine"));

    // conditioned run notes the conditioning
    let st = Command::new(bin())
        .args(["spine", "--epsilon", "0.5", "--x", "1", "--t", "2", "--reps", "200", "--seed", "7", "--endpoint", "0.5", "--out", "spc.jsonl"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("spc.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    let notes = m["summary"]["manifest"]["notes"].as_str().unwrap();
    assert!(notes.contains("conditioned") && notes.contains("endpoint=0.5"), "{notes}");
}

#[test]
fn verify_only_theta_runs_exactly_theta_checks() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(bin())
        .args(["verify", "--seed", "1", "--only", "theta_series_values,theta_identity", "--out", "bat.json"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bat.json")).unwrap())
            .unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    for c in checks {
        assert!(c["check_name"].as_str().unwrap().starts_with("theta_"));
        assert_eq!(c["verdict"], "pass");
    }
    // unknown prefix is a validation error
    let st = Command::new(bin())
        .args(["verify", "--only", "no_such_check"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn sweep_default_grid_has_three_rows_and_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(bin())
        .args(["sweep", "--reps", "1000", "--horizons", "2", "--seed", "3", "--out", "sw.csv"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(dir.path().join("sw.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,t,keps,keps_se,cond_pop_naive,cond_pop_naive_se,cond_pop_spine,reps,seed"
    );
    assert_eq!(lines.count(), 3);
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("sw.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["summary"]["cell_status"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.json"),
        r#"{"epsilons": [0.5], "horizons": [1.0], "reps_per_cell": 1000, "bogus": 1}"#,
    )
    .unwrap();
    let st = Command::new(bin())
        .args(["sweep", "--config", "sweep.json", "--out", "sw.csv"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(!dir.path().join("sw.csv").exists());

    // valid config accepted
    std::fs::write(
        dir.path().join("ok.json"),
        r#"{"epsilons": [0.5], "horizons": [1.0], "reps_per_cell": 1000}"#,
    )
    .unwrap();
    let st = Command::new(bin())
        .args(["sweep", "--config", "ok.json", "--out", "sw.csv"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    assert!(dir.path().join("sw.csv").exists());
}

#[test]
fn bad_spindle_workers_is_validation_error() {
    let st = Command::new(bin())
        .args(["verify", "--only", "theta_series_values"])
        .env("SPINDLE_WORKERS", "zero")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}
