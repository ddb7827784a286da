use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crackseg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates three 32^3 width-3 pairs and returns (dir, manifest).
fn dataset(root: &Path) -> (PathBuf, Value) {
    let data = root.join("data");
    ok(&["generate", "--side-exp", "5", "--widths", "3", "--per-arrangement", "1", "--phantom", "high-contrast",
        "--seed", "4", "--out", s(&data)]);
    let m: Value = serde_json::from_str(&fs::read_to_string(data.join("manifest.json")).unwrap()).unwrap();
    (data, m)
}

#[test]
fn generate_segment_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (data, m) = dataset(dir.path());
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let gray = data.join(entries[0]["gray_path"].as_str().unwrap());
    let truth = data.join(entries[0]["truth_path"].as_str().unwrap());
    let pred = dir.path().join("pred.mask");
    ok(&["segment", "--method", "frangi/w3/recall", s(&gray), s(&pred)]);
    let scores: Value =
        serde_json::from_str(&ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth), "--tol", "0,1"])).unwrap();
    let scores = scores.as_array().unwrap();
    assert_eq!(scores.len(), 2);
    assert!(scores[1]["recall"].as_f64().unwrap() >= scores[0]["recall"].as_f64().unwrap());

    let params = dir.path().join("sheet.json");
    fs::write(&params, r#"{"sigma":1.5,"rho":0.25,"delta":1.0,"t1":0.3}"#).unwrap();
    ok(&["segment", "--method", "sheet", "--params", s(&params), s(&gray), "--out", s(&pred)]);
    assert!(pred.exists());
}

#[test]
fn pipeline_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("pipeline.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "dataset": {"recipe": {"standard": {"side_exp": 5, "widths": [3], "singles": 1, "parallels": 1,
                                                "orthogonals": 1, "master_seed": 2, "phantom": "high-contrast",
                                                "hurst": [0.5, 0.99]}}},
            "methods": ["sheet/w{w}/recall"],
            "tolerances": [0, 1],
            "out_dir": out,
            "master_seed": 1,
            "evaluate_train": true
        })
        .to_string(),
    )
    .unwrap();
    ok(&["pipeline", "--config", s(&cfg)]);
    let csv = out.join("results.csv");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 3 * 2);
    let prov: Value = serde_json::from_str(&fs::read_to_string(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["status"], "ok");
    let summary: Value = serde_json::from_str(&ok(&["report", s(&csv)])).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 2);
}

#[test]
fn tune_reports_a_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let (data, m) = dataset(dir.path());
    let id = m["entries"][0]["id"].as_str().unwrap().to_string();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"params":[{"name":"t1","values":[0.2,0.4,0.6]}],"objective":"f1"}"#).unwrap();
    let res: Value = serde_json::from_str(&ok(&["tune", "--method", "sheet/w3/precision", "--grid", s(&grid),
        "--manifest", s(&data.join("manifest.json")), "--pair", &id])).unwrap();
    let t1 = res["best"]["t1"].as_f64().unwrap();
    assert!([0.2, 0.4, 0.6].contains(&t1));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.vol");
    let out = dir.path().join("o.mask");
    assert_eq!(run(&["segment", "--method", "sheet/w4/precision", s(&missing), s(&out)]).status.code(), Some(2));
    assert_eq!(run(&["segment", "--method", "sheet/w3/precision", s(&missing), s(&out)]).status.code(), Some(3));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dataset":{"manifest":"x"},"methods":[],"tolerances":[1],"out_dir":"o","master_seed":0,"extra":1}"#)
        .unwrap();
    assert_eq!(run(&["pipeline", "--config", s(&bad)]).status.code(), Some(2));
}
