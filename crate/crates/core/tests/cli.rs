use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn oneway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oneway")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn compiled(dir: &Path, circuit: &str) -> Value {
    let out = dir.join("pattern.json");
    let o = oneway(&["compile", circuit, out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn compile_hadamard_has_five_sites() {
    let dir = tempfile::tempdir().unwrap();
    let p = compiled(dir.path(), &data("hadamard.json"));
    assert_eq!(p["sites"].as_array().unwrap().len(), 5);
}

#[test]
fn malformed_json_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"version\": 1,\n  \"qubits\": 1\n  \"gates\": []\n}").unwrap();
    let o = oneway(&["compile", bad.to_str().unwrap(), dir.path().join("out.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    assert!(stderr(&o).contains("column"));
}

#[test]
fn missing_file_exits_2() {
    let o = oneway(&["schedule", "/nonexistent/pattern.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_adjacent_cnot_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(
        dir.path(),
        "c.json",
        &json!({"version": 1, "qubits": 3, "gates": [{"type": "CNOT", "control": 0, "target": 2}]}),
    );
    let o = oneway(&["compile", c.to_str().unwrap(), dir.path().join("out.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn dependency_cycle_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = compiled(dir.path(), &data("rotation.json"));
    let site = p["sites"].as_array_mut().unwrap().iter_mut().find(|s| s["id"] == 1).unwrap();
    site["depends"] = json!([0, 3]);
    let path = write_json(dir.path(), "cycle.json", &p);
    let o = oneway(&["schedule", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn full_mode_over_size_limit_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let rot = json!({"type": "ROT", "qubit": 0, "xi": 0.3, "eta": 0.5, "zeta": 0.7});
    let c = write_json(dir.path(), "c.json", &json!({"version": 1, "qubits": 1, "gates": vec![rot; 6]}));
    let c = c.to_str().unwrap();
    let o = oneway(&["run", c, "--shots", "1", "--mode", "full"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    let o = oneway(&["run", c, "--shots", "10", "--mode", "streamed"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn verify_beyond_oracle_limit_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let gates: Vec<Value> = (0..11).map(|q| json!({"type": "H", "qubit": q})).collect();
    let c = write_json(dir.path(), "c.json", &json!({"version": 1, "qubits": 11, "gates": gates}));
    let o = oneway(&["verify", c.to_str().unwrap(), "--shots", "10"]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
}

#[test]
fn corrupted_image_fails_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = compiled(dir.path(), &data("rotation.json"));
    let site = p["sites"].as_array_mut().unwrap().iter_mut().find(|s| s["id"] == 0).unwrap();
    site["image"] = json!({"x": "1", "z": "0"});
    let path = write_json(dir.path(), "corrupt.json", &p);
    let o = oneway(&["verify", path.to_str().unwrap(), "--shots", "2000"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL  fidelity"), "{}", stdout(&o));
    assert!(stderr(&o).contains("fidelity"));
}

#[test]
fn verify_bundled_circuits() {
    for name in ["hadamard.json", "bell.json", "rotation.json", "clifford3.json", "mixed2.json"] {
        let o = oneway(&["verify", &data(name), "--shots", "4000"]);
        assert!(o.status.success(), "{name}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn hadamard_distribution_is_all_zero() {
    let o = oneway(&["run", &data("hadamard.json"), "--shots", "500", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["distribution"], json!({"0": 1.0}));
}

#[test]
fn schedule_writes_rounds_next_to_pattern() {
    let dir = tempfile::tempdir().unwrap();
    compiled(dir.path(), &data("rotation.json"));
    let pattern = dir.path().join("pattern.json");
    let o = oneway(&["schedule", pattern.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Q_0: q0 q4"), "{}", stdout(&o));
    assert!(stdout(&o).contains("t_max = 3"));
    let rounds = fs::read_to_string(dir.path().join("pattern.schedule.json")).unwrap();
    assert_eq!(rounds, "[[0,4],[1],[2],[3]]");
}

#[test]
fn trace_has_one_line_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let o = oneway(&["run", &data("rotation.json"), "--shots", "3", "--mode", "full", "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<Value> =
        fs::read_to_string(trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3 * 4);
    assert!(lines.iter().all(|l| l.get("shot").is_some() && l.get("t").is_some()));
}
