use std::path::Path;
use std::process::{Command, Output};

fn strichartz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strichartz"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn counterexample_writes_csv_fixture_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = strichartz(dir.path(), &["counterexample", "--N", "1..16", "--out", "r.csv", "--no-timing"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("N,l8_eighth_power,ratio,fit_slope,fit_r2\n"));
    assert_eq!(csv.lines().count(), 6);
    assert!(dir.path().join("r.mset.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["ns"], serde_json::json!([1, 2, 4, 8, 16]));
    assert!(manifest["wall_seconds"].is_null());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"ls": [1], "lamda": [2]}"#).unwrap();
    let o = strichartz(dir.path(), &["scan", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lamda"));

    let o = strichartz(dir.path(), &["weyl", "--p", "64,x"]);
    assert_eq!(o.status.code(), Some(2));

    let o = strichartz(dir.path(), &["scan", "--data", "smooth", "--L", "1", "--N", "1", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn skipped_cells_exit_zero_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scan", "--L", "1", "--N", "1", "--lambda", "2", "--data", "extremized", "--out", "s.csv"];
    let o = strichartz(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(|c: char| c != ','), "skip reason recorded");

    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = strichartz(dir.path(), &strict);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exact_output_is_independent_of_shards() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for shards in ["1", "4", "8"] {
        let out = format!("m{shards}.csv");
        let o = strichartz(dir.path(), &["majorarc", "--Q", "4,8", "--shards", shards, "--out", &out]);
        assert!(o.status.success());
        outputs.push(std::fs::read(dir.path().join(out)).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn schema_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = strichartz(dir.path(), &["schema", "levelset"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.pointer("/properties/grid").is_some());
    let o = strichartz(dir.path(), &["schema", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
