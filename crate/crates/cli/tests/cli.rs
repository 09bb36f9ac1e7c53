use std::fs;
use std::path::Path;
use std::process::Command;

fn qlap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qlap"))
}

fn write_toy(dir: &Path) -> std::path::PathBuf {
    fs::write(dir.join("toy.csv"), "0.6,0.0\n0.0,0.8\n").unwrap();
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "input = \"toy.csv\"\noutput = \"report.json\"\nqpe_bits = 8\nqpe_shots = 4096\n").unwrap();
    cfg
}

#[test]
fn run_two_vertex_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let out = qlap().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["eigenvalues"].as_array().unwrap().len(), 1);
    assert_eq!(json["report"]["pass"], true);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let report = dir.path().join("lr.json");
    let out = qlap()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--target", "Ls", "--seed", "5", "--verify-only", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["config"]["target"], "Ls");
    assert_eq!(json["config"]["seed"], 5);
    assert!(json["report"]["qpe"].is_null());
}

#[test]
fn missing_input_exits_two_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "input = \"absent.csv\"\n").unwrap();
    let out = qlap().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    fs::write(&cfg, "input = \"toy.csv\"\nlambdaa = 0.5\n").unwrap();
    let out = qlap().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambdaa"));
}

#[test]
fn verify_small_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.jsonl");
    let out = qlap().args(["verify", "--sizes", "small", "--out"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().all(|l| l["pass"] == true));
    assert!(lines.iter().any(|l| l["check"].as_str().unwrap().starts_with("tensor_power")));
}
