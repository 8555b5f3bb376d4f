use std::path::PathBuf;
use std::process::{Command, Output};

fn damplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damplab"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env_remove("DAMPLAB_LOG")
        .output()
        .expect("binary runs")
}

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("models")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn spectrum_exit_codes() {
    let o = damplab(&["spectrum", "--model", &model("case1.json"), "--gamma", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("+1.224744871i"));
    let o = damplab(&["spectrum", "--model", &model("case1.json"), "--gamma", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = damplab(&["spectrum", "--model", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn hopf_scan_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = damplab(&["hopf-scan", "--model", &model("case2.json"), "--gamma-range", "0.1:0.3:41", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("subcritical"));
    let locus = std::fs::read_to_string(dir.path().join("locus.csv")).unwrap();
    assert!(locus.starts_with("gamma,pair,re,im\n"));
    let certs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificates.json")).unwrap()).unwrap();
    assert_eq!(certs.as_array().unwrap().len(), 1);
    assert_eq!(certs[0]["kind"], "Subcritical");
}

#[test]
fn hopf_scan_constant_damping_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(model("case1.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut obj = v.as_object().unwrap().clone();
    obj.remove("damping_sensitivity");
    obj.insert("damping".into(), serde_json::json!([0.5, 0.5, 1.5]));
    let path = dir.path().join("stable.json");
    std::fs::write(&path, serde_json::to_string(&obj).unwrap()).unwrap();
    let o = damplab(&["hopf-scan", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 crossing(s)"));
}

#[test]
fn bad_arguments_exit_one() {
    let o = damplab(&["hopf-scan", "--model", &model("case2.json"), "--gamma-range", "0.3:0.1:41"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(damplab(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_outputs_and_zero_span() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = damplab(&[
        "simulate", "--model", &model("case2.json"), "--gamma", "0.25", "--initial-state", "1.5905,0,0", "--cycle",
        "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("SpiralIn"));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,event\n"));
    assert!(csv.contains("section+"));
    let cycle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cycle.json")).unwrap()).unwrap();
    assert!((cycle["period"].as_f64().unwrap() - 6.79).abs() < 0.01);

    let o = damplab(&["simulate", "--model", &model("case2.json"), "--t-end", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let o = damplab(&["simulate", "--model", &model("case2.json"), "--initial-state", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_is_deterministic_and_detects_fault() {
    let a = damplab(&["verify", "--seed", "42", "--trial-scale", "0.2"]);
    let b = damplab(&["verify", "--seed", "42", "--trial-scale", "0.2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let o = damplab(&[
        "verify", "--inject-fault", "flip-weight-sign", "--suite", "observability-hyperbolicity", "--trial-scale", "0.2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let failures: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("failures.json")).unwrap()).unwrap();
    assert!(failures[0]["instance"]["L"].is_array());
}

#[test]
fn reduce_exports_referenced_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = damplab(&["reduce", "--model", &model("case1.json"), "--gamma", "0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("referenced.json")).unwrap()).unwrap();
    assert_eq!(doc["dimension"], 5);
    assert_eq!(doc["jacobian"].as_array().unwrap().len(), 5);
}
