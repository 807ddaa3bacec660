//! End-to-end runs of the installed binary: every test spawns the real
//! executable, so exit codes, stdout JSON, and file side effects are
//! checked exactly as a shell pipeline would see them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polybase"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| {
        panic!("stdout is not one JSON document: {e}\n--- stdout ---\n{text}")
    })
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("write fixture");
    path
}

fn l1_plane(k: &str) -> String {
    format!(
        r#"{{"labels":["a","b"],"k_bound":"{k}","ball":{{"dim":2,"generators":[["1","0"],["0","1"]]}}}}"#
    )
}

/// conv{±(5/4,1/2), ±e₁, ±e₂}: normalized, suppression exactly 5/4.
fn skewed_hexagon(k: &str) -> String {
    format!(
        r#"{{"labels":["a","b"],"k_bound":"{k}","ball":{{"dim":2,"generators":[["5/4","1/2"],["1","0"],["0","1"]]}}}}"#
    )
}

#[test]
fn validate_accepts_the_l1_plane() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "l1.json", &l1_plane("1"));
    let out = run(&["validate", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["valid"], Value::Bool(true));
    assert_eq!(doc["report"]["suppression"], "1");
}

#[test]
fn validate_rejects_an_overclaimed_bound_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "claimed.json", &skewed_hexagon("1"));
    let out = run(&["validate", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let doc = stdout_json(&out);
    assert_eq!(doc["valid"], Value::Bool(false));
    let witness = &doc["report"]["suppression_failures"][0];
    assert_eq!(witness["labels"], serde_json::json!(["a"]));
    assert_eq!(witness["norm"], "5/4");
}

#[test]
fn malformed_rationals_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "bad.json", &l1_plane("1/0"));
    let out = run(&["validate", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["kind"], "input");
}

#[test]
fn suppress_prints_the_exact_constant() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "hex.json", &skewed_hexagon("5/4"));
    let out = run(&["suppress", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["suppression"], "5/4");
    assert!(String::from_utf8_lossy(&out.stdout).contains("5/4"));
}

#[test]
fn norm_reports_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "l1.json", &l1_plane("1"));
    let out = run(&[
        "norm",
        "--space",
        space.to_str().unwrap(),
        "--point",
        "1/3,1/3",
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["norm"], "2/3");
    assert_eq!(doc["point"], serde_json::json!(["1/3", "1/3"]));
}

#[test]
fn renorm_leaves_a_one_based_space_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "l1.json", &l1_plane("1"));
    let out = run(&["renorm", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    let original: Value = serde_json::from_str(&l1_plane("1")).unwrap();
    assert_eq!(doc, original);
}

#[test]
fn plot_data_emits_vertices_counterclockwise() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "hex.json", &skewed_hexagon("5/4"));
    let csv = dir.path().join("ball.csv");
    let out = run(&[
        "suppress",
        "--space",
        space.to_str().unwrap(),
        "--plot-data",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body, "x,y\n1,0\n5/4,1/2\n0,1\n-1,0\n-5/4,-1/2\n0,-1\n");
}

#[test]
fn amalgamate_emits_a_verified_pushout() {
    let dir = tempfile::tempdir().unwrap();
    let trivial = r#"{"labels":[],"k_bound":"1","ball":{"dim":0,"generators":[]}}"#;
    let seg = r#"{"labels":["u"],"k_bound":"1","ball":{"dim":1,"generators":[["1"]]}}"#;
    let left = write(
        dir.path(),
        "left.json",
        &format!(r#"{{"domain":{trivial},"codomain":{seg},"label_map":{{}}}}"#),
    );
    let seg2 = r#"{"labels":["v"],"k_bound":"1","ball":{"dim":1,"generators":[["1"]]}}"#;
    let right = write(
        dir.path(),
        "right.json",
        &format!(r#"{{"domain":{trivial},"codomain":{seg2},"label_map":{{}}}}"#),
    );
    let out = run(&[
        "amalgamate",
        "--left",
        left.to_str().unwrap(),
        "--right",
        right.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["space"]["labels"], serde_json::json!(["u", "v"]));
    assert_eq!(doc["space"]["k_bound"], "1");
}

#[test]
fn build_universal_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("one.json");
    let second = dir.path().join("two.json");
    for path in [&first, &second] {
        let out = run(&[
            "build-universal",
            "--seed",
            "11",
            "--max-dim",
            "2",
            "--max-den",
            "2",
            "--max-gen",
            "4",
            "--steps",
            "20",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let receipt = stdout_json(&out);
        assert_eq!(receipt["status"], "ok");
        assert_eq!(receipt["wrote"], path.to_str().unwrap());
    }
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn a_built_chain_passes_its_audit_and_a_corrupted_one_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("chain.json");
    let out = run(&[
        "build-universal",
        "--seed",
        "11",
        "--max-dim",
        "2",
        "--max-den",
        "2",
        "--max-gen",
        "4",
        "--steps",
        "12",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let audit = run(&["suite", "chain", "--file", file.to_str().unwrap()]);
    assert_eq!(code(&audit), 0, "stderr: {}", String::from_utf8_lossy(&audit.stderr));
    let doc = stdout_json(&audit);
    assert_eq!(doc["replay_reproduces_file"], Value::Bool(true));

    // Appending a never-executed request leaves every structural invariant
    // intact, but the replay grows one stage too many.
    let mut wire: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let fake: Value = serde_json::from_str(
        r#"{"source_stage":0,
            "target":{"labels":["zz"],"k_bound":"1","ball":{"dim":1,"generators":[["1"]]}},
            "embedding":{}}"#,
    )
    .unwrap();
    wire["log"].as_array_mut().unwrap().push(fake);
    let corrupted = write(dir.path(), "corrupted.json", &wire.to_string());

    let audit = run(&["suite", "chain", "--file", corrupted.to_str().unwrap()]);
    assert_eq!(code(&audit), 3, "stderr: {}", String::from_utf8_lossy(&audit.stderr));
    let doc = stdout_json(&audit);
    assert_eq!(doc["kind"], "property");
    assert!(doc["error"]
        .as_str()
        .unwrap()
        .contains("does not reproduce"));
}

#[test]
fn backforth_exact_completes_between_two_builds() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    let y = dir.path().join("y.json");
    for (seed, path, steps) in [("11", &x, "6"), ("12", &y, "9")] {
        let out = run(&[
            "build-universal",
            "--seed",
            seed,
            "--max-dim",
            "2",
            "--max-den",
            "2",
            "--max-gen",
            "4",
            "--steps",
            steps,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let out = run(&[
        "backforth",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--rounds",
        "2",
        "--grow",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["status"], "complete");
    assert_eq!(doc["transcript"]["mode"], "exact");
    assert_eq!(doc["transcript"]["f"].as_array().unwrap().len(), 2);
}

#[test]
fn backforth_epsilon_certifies_against_the_recorded_delta() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    let y = dir.path().join("y.json");
    for (seed, path) in [("11", &x), ("12", &y)] {
        let out = run(&[
            "build-universal",
            "--seed",
            seed,
            "--max-dim",
            "2",
            "--max-den",
            "2",
            "--max-gen",
            "4",
            "--steps",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let out = run(&[
        "backforth",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--mode",
        "eps",
        "--epsilon",
        "1/2",
        "--rounds",
        "2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["status"], "complete");
    assert!(doc["transcript"]["mode"]["epsilon"].is_string());
}

#[test]
fn suite_amalgam_passes_at_small_scale() {
    let out = run(&["suite", "amalgam", "--cases", "5", "--seed", "1"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["passed"], 5);
    assert_eq!(doc["failures"], serde_json::json!([]));
}

#[test]
fn unknown_suites_are_input_errors() {
    let out = run(&["suite", "nonesuch"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["kind"], "input");
}

#[test]
fn emitted_spaces_reparse_to_equal_values() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "hex.json", &skewed_hexagon("5/4"));
    let out = run(&["renorm", "--space", space.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    // Feed the output back in: a fixed point of renorming, bound exactly 1.
    let roundtrip = write(dir.path(), "renormed.json", &doc.to_string());
    let again = run(&["renorm", "--space", roundtrip.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout_json(&again), doc);
    assert_eq!(doc["k_bound"], "1");
}
