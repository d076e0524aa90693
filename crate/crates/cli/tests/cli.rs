use std::path::Path;
use std::process::{Command, Output};

fn nilm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SPEC: &str = r#"{"num_appliances": 3, "num_lines": 2, "states": [3], "p_stay": 0.9,
    "horizon": 200, "seed": 5,
    "connectivity": [{"single_line": 0}, {"split_pair": [0, 1, 0.25]}, {"single_line": 1}]}"#;

fn house(dir: &Path) {
    std::fs::write(dir.join("spec.json"), SPEC).unwrap();
    let o = nilm(dir, &["generate", "--spec", "spec.json", "--out", "house"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    let first = std::fs::read(dir.path().join("house/aggregate.csv")).unwrap();
    let o = nilm(dir.path(), &["generate", "--spec", "spec.json", "--out", "again"]);
    assert_eq!(code(&o), 0);
    for f in ["aggregate.csv", "truth.csv", "model.json", "appliance_appliance2.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("house").join(f)).unwrap(),
            std::fs::read(dir.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(!first.is_empty());
}

#[test]
fn bad_generator_specs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilm(dir.path(), &["generate", "--spec", "missing.json", "--out", "x"]);
    assert_eq!(code(&o), 2);
    std::fs::write(dir.path().join("neg.json"), SPEC.replace("\"seed\": 5", "\"seed\": 5, \"noise_std\": -1")).unwrap();
    let o = nilm(dir.path(), &["generate", "--spec", "neg.json", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise_std"));
}

#[test]
fn train_defaults_to_three_states_and_recovers_wiring() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    let o = nilm(dir.path(), &["train", "--data", "house", "--out", "model.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("appliance1") && stdout.contains("w = ["));
    let text = std::fs::read_to_string(dir.path().join("model.json")).unwrap();
    let model: serde_json::Value = serde_json::from_str(&text).unwrap();
    let apps = model["appliances"].as_array().unwrap();
    assert!(apps.iter().all(|a| a["mu"].as_array().unwrap().len() == 3));
    let w: Vec<f64> = apps[1]["weights"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((w[0] - 0.25).abs() < 1e-2 && (w[1] - 0.75).abs() < 1e-2);
}

#[test]
fn train_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    std::fs::remove_file(dir.path().join("house/appliance_appliance3.csv")).unwrap();
    let o = nilm(dir.path(), &["train", "--data", "house", "--out", "m.json"]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("aggregate.csv"), "timestamp,line_1\n0,10\n60,oops\n").unwrap();
    std::fs::write(bad.join("appliance_a.csv"), "timestamp,watts\n0,10\n60,10\n").unwrap();
    let o = nilm(dir.path(), &["train", "--data", "bad", "--out", "m.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn disaggregate_writes_estimates_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    let args = ["disaggregate", "--model", "house/model.json", "--agg", "house/aggregate.csv", "--seed", "4"];
    let o = nilm(dir.path(), &[&args[..], &["--out", "a.csv"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = nilm(dir.path(), &[&args[..], &["--out", "b.csv"]].concat());
    assert_eq!(code(&o), 0);
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with("timestamp,appliance1,appliance2,appliance3\n"));
    assert_eq!(a.lines().count(), 201);

    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.trace.json")).unwrap()).unwrap();
    let costs: Vec<f64> = trace["set_costs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace["stop_reason"].is_string());
}

#[test]
fn disaggregate_rejects_line_mismatch_and_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    std::fs::write(dir.path().join("three.csv"), "timestamp,line_1,line_2,line_3\n0,1,2,3\n").unwrap();
    let o = nilm(
        dir.path(),
        &["disaggregate", "--model", "house/model.json", "--agg", "three.csv", "--out", "x.csv"],
    );
    assert_eq!(code(&o), 2);
    let o = nilm(
        dir.path(),
        &["disaggregate", "--model", "house/model.json", "--agg", "house/aggregate.csv", "--out", "x.csv", "--method", "nope"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_scores_truth_as_zero_and_reports_skips() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    let o = nilm(
        dir.path(),
        &["disaggregate", "--model", "house/model.json", "--agg", "house/aggregate.csv", "--method", "viterbi", "--out", "x.csv"],
    );
    assert_eq!(code(&o), 0);
    let o = nilm(dir.path(), &["evaluate", "--truth", "house", "--estimates", "x.csv", "--report", "r.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["average"].as_f64(), Some(0.0));
    assert!(r["skipped"].is_u64() && r["counted"].is_u64());
}

#[test]
fn evaluate_rejects_misaligned_estimates() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    std::fs::write(
        dir.path().join("short.csv"),
        "timestamp,appliance1,appliance2,appliance3\n1700000000,0,0,0\n",
    )
    .unwrap();
    let o = nilm(dir.path(), &["evaluate", "--truth", "house", "--estimates", "short.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilm(dir.path(), &["verify", "--seeds", "1"]);
    assert_eq!(code(&o), 0);
    let o = nilm(dir.path(), &["verify", "--seeds", "3", "--inject-lambda-flip"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("witness instance seed"));
}

#[test]
fn split_halves_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    house(dir.path());
    let o = nilm(dir.path(), &["split", "--data", "house", "--train-out", "tr", "--test-out", "te"]);
    assert_eq!(code(&o), 0);
    let rows = |p: &str| std::fs::read_to_string(dir.path().join(p)).unwrap().lines().count() - 1;
    assert_eq!(rows("tr/aggregate.csv"), 100);
    assert_eq!(rows("te/truth.csv"), 100);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nilm(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&nilm(dir.path(), &["verify", "--size", "huge"])), 2);
}
