use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preimage")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("stdout is JSON")
}

fn model(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

#[test]
fn identity_model_matches_golden() {
    let out = run(&["preimage", "--model", &model("identity.json"), "--target", "3,4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), golden("identity.json"));
    assert_eq!(json(&out)["branches"].as_array().unwrap().len(), 1);
}

#[test]
fn relu_zero_matches_golden() {
    let out = run(&["preimage", "--model", &model("relu1.json"), "--target", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), golden("relu1_zero.json"));
}

#[test]
fn text_format_matches_golden() {
    let out = run(&["preimage", "--model", &model("mixed.json"), "--target", "47/6,47/6", "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), golden("mixed.txt"));
}

#[test]
fn negative_relu_target_is_empty() {
    for target in ["-1", "\u{2212}1"] {
        let out = run(&["preimage", "--model", &model("relu1.json"), "--target", target]);
        assert_eq!(out.status.code(), Some(2));
        assert!(json(&out)["branches"].as_array().unwrap().is_empty());
    }
}

#[test]
fn budget_truncates_and_flags_partial() {
    let out = run(&["preimage", "--model", &model("relu3.json"), "--target", "1", "--max-branches", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), golden("relu3_budget.json"));
    let doc = json(&out);
    assert_eq!(doc["partial"], Value::Bool(true));
    assert_eq!(doc["branches"].as_array().unwrap().len(), 4);

    let full = json(&run(&["preimage", "--model", &model("relu3.json"), "--target", "1"]));
    assert_eq!(full["partial"], Value::Bool(false));
    assert_eq!(full["branches"].as_array().unwrap().len(), 7);
    assert_eq!(full["enumerated"].to_string(), "8");

    let strict =
        run(&["preimage", "--model", &model("relu3.json"), "--target", "1", "--max-branches", "4", "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("budget"));
    assert_eq!(
        run(&["preimage", "--model", &model("relu3.json"), "--target", "1", "--max-branches", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn errors_exit_with_one() {
    let bad = run(&["preimage", "--model", &model("bad_dims.json"), "--target", "0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("layers[0].weights"));

    let length = run(&["preimage", "--model", &model("identity.json"), "--target", "1"]);
    assert_eq!(length.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&length.stderr).contains("components"));

    let missing = run(&["preimage", "--model", &model("does_not_exist.json"), "--target", "1"]);
    assert_eq!(missing.status.code(), Some(1));

    let malformed = run(&["preimage", "--model", &model("identity.json"), "--target", "1,x"]);
    assert_eq!(malformed.status.code(), Some(1));

    let no_target = run(&["preimage", "--model", &model("identity.json")]);
    assert_eq!(no_target.status.code(), Some(1));
}

#[test]
fn output_is_deterministic_across_threads_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let args = ["preimage", "--model", &model("mixed.json"), "--target", "47/6,47/6"];
    let single = run(&[&["--threads", "1"], &args[..]].concat());
    let many = run(&[&["--threads", "4"], &args[..]].concat());
    assert_eq!(single.stdout, many.stdout);
    let written = run(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert_eq!(written.status.code(), Some(0));
    assert!(written.stdout.is_empty());
    assert_eq!(fs::read(&path).unwrap(), single.stdout);
}

#[test]
fn verify_identity_passes() {
    let out = run(&["verify", "--model", &model("identity.json"), "--target", "3,4"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verification"]["samples_drawn"].to_string(), "8");
    assert!(doc["verification"]["round_trip_failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_grid_and_oracle_pass() {
    let out = run(&[
        "verify",
        "--model",
        &model("mixed.json"),
        "--target",
        "47/6,47/6",
        "--verify",
        "grid",
        "--grid",
        "-3:3:1/4",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let v = &json(&out)["verification"];
    assert_eq!(v["grid_points"].to_string(), "625");
    assert_eq!(v["grid_hits"].to_string(), "1");
    assert_eq!(v["oracle_checked"].to_string(), "2");

    let sym = run(&["verify", "--model", &model("mixed.json"), "--symbolic", "--verify", "grid", "--grid", "-2:2:1/2"]);
    assert_eq!(sym.status.code(), Some(0));
    assert_eq!(json(&sym)["verification"]["grid_hits"].to_string(), "81");
}

#[test]
fn verify_random_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("random.json");
    fs::write(
        &model_path,
        r#"{"input_dim": 2, "layers": [
            {"weights": [["3/4", -2], [1, "1/3"], ["-5/2", 1]], "biases": ["1/2", 0, -1], "activation": "relu"},
            {"weights": [[1, -1, 2], ["2/7", 1, 0]], "biases": [0, "-3/2"]}
        ]}"#,
    )
    .unwrap();
    let path = model_path.to_str().unwrap();
    // forward(1, -1/2) = (17/12, -1/42)
    let out = run(&["verify", "--model", path, "--target", "17/12,-1/42", "--samples", "16", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let doc = json(&out);
    let branches = doc["preimage"]["branches"].as_array().unwrap().len();
    assert!(branches >= 1);
    assert_eq!(doc["verification"]["samples_drawn"].to_string(), (16 * branches).to_string());
}

#[test]
fn corrupted_preimage_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let doc_path = dir.path().join("pre.json");
    let good = run(&[
        "preimage",
        "--model",
        &model("mixed.json"),
        "--target",
        "47/6,47/6",
        "--out",
        doc_path.to_str().unwrap(),
    ]);
    assert_eq!(good.status.code(), Some(0));
    let ok = run(&["verify", "--model", &model("mixed.json"), "--preimage", doc_path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));

    let text = fs::read_to_string(&doc_path).unwrap().replace("\"const\": \"2\"", "\"const\": \"3\"");
    fs::write(&doc_path, text).unwrap();
    let bad = run(&["verify", "--model", &model("mixed.json"), "--preimage", doc_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!json(&bad)["verification"]["round_trip_failures"].as_array().unwrap().is_empty());
}

#[test]
fn bench_reports_growth() {
    let out = run(&["bench", "--hidden-widths", "1,2,3", "--shapes", "2-2-2-1"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out);
    let counts: Vec<String> = rows.as_array().unwrap().iter().map(|r| r["enumerated"].to_string()).collect();
    assert_eq!(counts, ["16", "2", "4", "8"]);

    let linear = json(&run(&["bench", "--hidden-widths", "1,3", "--activation", "identity"]));
    assert!(linear.as_array().unwrap().iter().all(|r| r["enumerated"].to_string() == "1" && r["feasible"].to_string() == "1"));

    let text = run(&["bench", "--hidden-widths", "2", "--format", "text"]);
    assert!(stdout(&text).starts_with("shape"));
    assert_eq!(run(&["bench", "--shapes", "2-20-1"]).status.code(), Some(1));
}
