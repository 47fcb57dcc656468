use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cesig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cesig"))
        .args(args)
        .output()
        .expect("spawn cesig")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn missing_config_exits_2_with_path() {
    let out = cesig(&["ce-run", "--config", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/definitely/not/here.json"));
}

#[test]
fn bad_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sweep": {"snrs_db": ["loud"]}}"#);
    let out = cesig(&["sr-sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep.snrs_db"), "{err}");

    let cfg = write_config(dir.path(), r#"{"n_frames": 12}"#);
    let out = cesig(&["ce-run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_frames"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(cesig(&["warp-drive"]).status.code(), Some(2));
}

#[test]
fn fsm_check_with_defenses_is_safe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"fsm": {"pairs": false}}"#);
    let out = cesig(&["fsm-check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["benign_steps"], 13);
    for c in v["checks"].as_array().unwrap() {
        assert_eq!(c["safe"], c["defenses"] == "full", "{c}");
    }
}

#[test]
fn fsm_check_without_signature_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"fsm": {"pairs": false, "necessity": false, "defenses": {"signature": false, "time_bound": true, "seq_check": true, "channel_check": true}}}"#,
    );
    assert_eq!(
        cesig(&["fsm-check", "--config", &cfg]).status.code(),
        Some(1)
    );
}

#[test]
fn spoofed_element_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"adversary": {"action": "spoof_element_keep_preamble"}}"#,
    );
    for seed in ["1", "2", "3"] {
        let out = cesig(&["ce-run", "--config", &cfg, "--seed", seed]);
        assert_eq!(out.status.code(), Some(1));
        let v = json(&out);
        assert_eq!(v["outcome"], "rejected");
        let reason = v["reason"].as_str().unwrap();
        assert!(
            ["time_bound_violation", "signature_failure"].contains(&reason),
            "{reason}"
        );
    }
}

#[test]
fn honest_ce_run_matches_cost_table() {
    let out = cesig(&["ce-run"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["outcome"], "connected");
    assert_eq!(v["t_ce_ms"], 306.54);
    assert_eq!(v["t_extract_ms"], 0.26);
}

#[test]
fn shipped_scenario_runs() {
    let cfg = data("scenario.json");
    let out = cesig(&["ce-run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["n_frames"], 14);
    assert_eq!(v["code_width"], 18);
}

#[test]
fn seed_flag_changes_output() {
    let a = cesig(&["relay-sim", "--seed", "1"]);
    let b = cesig(&["relay-sim", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(a.stdout, cesig(&["relay-sim", "--seed", "1"]).stdout);
}

#[test]
fn out_dir_env_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cesig"))
        .args(["ce-run", "--format", "csv", "--out", "reports/ce.csv"])
        .env("CESIG_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(dir.path().join("reports/ce.csv")).unwrap();
    assert!(
        body.starts_with("index,attempt,channel,gap_ms,within_t_in,via_adversary,slice_status\n")
    );
    assert_eq!(body.lines().count(), 14);
}

#[test]
fn pca_on_shipped_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let csv = data("sig_sample.csv");
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"pca": {{"input_csv": {:?}}}}}"#, csv),
    );
    let out = cesig(&["pca", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["ap_accuracy"], 1.0);
    assert_eq!(v["ce_accuracy"], 1.0);
}

#[test]
fn detect_on_shipped_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = data("timing_sample.csv");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"detector": {{"input_csv": {:?}, "repeats": 1, "kind": "threshold"}}}}"#,
            csv
        ),
    );
    let out = cesig(&["detect", "--config", &cfg, "--format", "csv"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("repeat,setup,accuracy,f1_score,tpr,tnr,ppv,npv\n"));
    assert!(body.lines().any(|l| l.starts_with("0,all,")));
}

#[test]
fn detect_threshold_miss_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"detector": {"per_class": 100, "repeats": 1, "min_accuracy": 0.999}}"#,
    );
    assert_eq!(cesig(&["detect", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn malformed_input_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "rate_mbps,length_bytes,duration_us\n6,120,180\n6,abc,180\n",
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"pca": {{"input_csv": {:?}}}}}"#, csv),
    );
    let out = cesig(&["pca", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
