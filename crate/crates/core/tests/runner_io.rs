use strichartz_core::counterexample::build_phi_n;
use strichartz_core::runner::{self, Command, RunManifest, RunOptions};
use strichartz_core::LabError;

fn run(name: &str, config: &str, dir: &std::path::Path, shards: usize) -> runner::RunOutcome {
    let cmd = Command::from_json(name, config).unwrap();
    let opts = RunOptions {
        seed: 1,
        shards,
        no_timing: true,
        ..RunOptions::new(dir.join(format!("{name}.csv")))
    };
    runner::run(&cmd, &opts).unwrap()
}

#[test]
fn every_artifact_has_a_parsable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("counterexample", r#"{"ns": [1, 2, 4, 8]}"#, dir.path(), 2);
    assert_eq!(out.artifacts.len(), 2);
    for a in &out.artifacts {
        let m = RunManifest::read(&RunManifest::sidecar(a)).unwrap();
        assert_eq!(m, out.manifest);
        assert_eq!(m.command, "counterexample");
        assert_eq!(m.wall_seconds, None);
        assert!(m.guards.contains_key("exact_p8_max_support"));
        assert!(m.profiles.contains_key("eta"));
    }
    let csv = std::fs::read_to_string(&out.artifacts[0]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,l8_eighth_power,ratio,fit_slope,fit_r2"));
    assert_eq!(
        lines.next().unwrap().split(',').nth(1),
        Some("7.0000000000000000e1")
    );
}

#[test]
fn norm_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("phi.json");
    std::fs::write(&input, build_phi_n(4).unwrap().to_json().unwrap()).unwrap();
    let cfg = serde_json::json!({"input": input, "p": 4}).to_string();
    let out = run("norm", &cfg, dir.path(), 1);
    let csv = std::fs::read_to_string(&out.artifacts[0]).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    // 12N² − 6N at N = 4.
    assert!(rows[1].contains(",4,exact-counting,"), "{}", rows[1]);
    assert!(rows[1].contains("1.6800000000000000e2"), "{}", rows[1]);
}

#[test]
fn reruns_are_byte_identical_across_shards() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = r#"{"ns": [8, 16]}"#;
    let x = run("mcount", cfg, &a, 1);
    let y = run("mcount", cfg, &b, 4);
    assert_eq!(
        std::fs::read(&x.artifacts[0]).unwrap(),
        std::fs::read(&y.artifacts[0]).unwrap()
    );
}

#[test]
fn config_errors_carry_their_path() {
    let err = Command::from_json("majorarc", r#"{"kernels": [{"l": 1, "n": 2, "lamda": 1}]}"#).unwrap_err();
    match err {
        LabError::Config { path, .. } => assert_eq!(path, "kernels[0].lamda"),
        other => panic!("{other:?}"),
    }
    assert!(Command::from_json("nope", "{}").is_err());
    let schema = Command::schema("scan").unwrap();
    assert!(schema.pointer("/properties/lambdas").is_some());
}

#[test]
fn failed_runs_leave_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = Command::from_json("norm", r#"{"input": "/nonexistent/u.json"}"#).unwrap();
    let out = dir.path().join("n.csv");
    assert!(runner::run(&cmd, &RunOptions::new(&out)).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
