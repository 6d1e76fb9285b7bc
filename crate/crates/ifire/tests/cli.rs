//! End-to-end checks of the `ifire` binary: exit codes, determinism, and
//! the dump-model round trip.

use std::path::Path;
use std::process::{Command, Output};

use ifire::schema::ModelFile;

fn ifire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifire"))
        .args(args)
        .output()
        .expect("spawn ifire")
}

#[test]
fn missing_model_is_a_usage_error() {
    let out = ifire(&["map", "--model", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = ifire(&["simulate", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"n\": 2, \"mystery_field\": true}").unwrap();
    let out = ifire(&["map", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dump_model_round_trips_hash_equal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let out = ifire(&[
        "dump-model",
        "--preset",
        "random",
        "--n",
        "10",
        "--epsilon",
        "0.08",
        "--seed",
        "42",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let first = ModelFile::load(&path).unwrap();
    let hash = first.hash().unwrap();
    // Re-emit the reparsed file: identical model, identical hash.
    let second_path = dir.path().join("model2.json");
    first.save(&second_path).unwrap();
    let second = ModelFile::load(&second_path).unwrap();
    assert_eq!(hash, second.hash().unwrap());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        std::fs::read_to_string(&second_path).unwrap()
    );
}

fn simulate_to(dir: &Path, model: &Path, sub: &str) -> String {
    let out_dir = dir.join(sub);
    let out = ifire(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "7",
        "--max-events",
        "50",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    std::fs::read_to_string(out_dir.join("log.csv")).unwrap()
}

#[test]
fn seeded_simulation_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("peskin.json");
    assert!(ifire(&[
        "dump-model",
        "--preset",
        "peskin",
        "--epsilon",
        "0.2",
        "--out",
        model.to_str().unwrap(),
    ])
    .status
    .success());

    let a = simulate_to(dir.path(), &model, "a");
    let b = simulate_to(dir.path(), &model, "b");
    assert_eq!(a, b);
}

#[test]
fn absorbing_start_synchronizes_at_first_event() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("peskin.json");
    assert!(ifire(&[
        "dump-model",
        "--preset",
        "peskin",
        "--epsilon",
        "0.2",
        "--out",
        model.to_str().unwrap(),
    ])
    .status
    .success());

    let out_dir = dir.path().join("sim");
    let out = ifire(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--x0",
        "0,0.9",
        "--max-events",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["sync_event_index"], 1);
    assert_eq!(summary["synchronized"], true);
}

#[test]
fn quadratic_analysis_reports_a2_false() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("quadratic.json");
    assert!(ifire(&[
        "dump-model",
        "--preset",
        "quadratic",
        "--epsilon",
        "0.1",
        "--out",
        model.to_str().unwrap(),
    ])
    .status
    .success());

    let out_dir = dir.path().join("map");
    let out = ifire(&[
        "map",
        "--model",
        model.to_str().unwrap(),
        "--grid",
        "32",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let analysis: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("analysis.json")).unwrap())
            .unwrap();
    assert_eq!(analysis["conditions"]["a2"], false);
    let eta = analysis["eta"].as_f64().unwrap();
    assert!((eta - 0.9 / 1.1).abs() < 1e-6);
}
