use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn fixtures() -> PathBuf {
    root().join("fixtures")
}

fn verisolve(cwd: &Path, args: &[&str]) -> Output {
    let f = fixtures();
    let tools = f.join("tools");
    let prompts = root().join("prompts");
    Command::new(env!("CARGO_BIN_EXE_verisolve"))
        .current_dir(cwd)
        .env_remove("VERISOLVE_ENDPOINT")
        .env_remove("VERISOLVE_MODEL")
        .env_remove("VERISOLVE_API_KEY")
        .arg("--tools-dir")
        .arg(&tools)
        .arg("--prompts-dir")
        .arg(&prompts)
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn tools_validate_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = verisolve(dir.path(), &["tools", "validate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 valid tools, 0 problems"));
    let out = verisolve(dir.path(), &["tools", "list"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("CheckSelection [eval]"));
    assert!(text.contains("SumValues"));
}

#[test]
fn invalid_tool_dir_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("Broken");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("tool.json"), "{\"name\": \"Broken\"}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_verisolve"))
        .args(["--tools-dir", path(dir.path()), "tools", "validate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = verisolve(dir.path(), &["--no-such-flag", "tools", "list"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
}

#[test]
fn conflicting_backends_are_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = fixtures().join("scripts/assist_solve.json");
    let out = verisolve(
        dir.path(),
        &["--scripted", path(&script), "--endpoint", "http://127.0.0.1:9", "solve", "--question", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scripted_solve_then_pack() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let script = f.join("scripts/assist_solve.json");
    let question = f.join("questions/assist.txt");
    let out = verisolve(
        dir.path(),
        &["--runs-dir", "runs", "--scripted", path(&script), "solve", "--question", path(&question), "--run-id", "r1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["score"], 1.0);
    assert_eq!(summary["package_verified"], true);
    let run = dir.path().join("runs/r1");
    for name in ["transcript.jsonl", "run.json", "solver.py", "evaluator.py", "project/run.sh"] {
        assert!(run.join(name).is_file(), "{name}");
    }

    let out = verisolve(dir.path(), &["--runs-dir", "runs", "pack", "--run", "r1", "--out", "packed"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("packed/project_manifest.json").is_file());

    let out = verisolve(dir.path(), &["--runs-dir", "runs", "pack", "--run", "missing", "--out", "p2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_solve_still_writes_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("short.json");
    fs::write(&script, r#"[{"prompt": "p_cls", "response": "```json\n{\"task_type\": \"assist\"}\n```"}]"#).unwrap();
    let out = verisolve(
        dir.path(),
        &["--runs-dir", "runs", "--scripted", path(&script), "solve", "--question", "add numbers", "--run-id", "f1"],
    );
    assert_eq!(out.status.code(), Some(1));
    let run = dir.path().join("runs/f1");
    let transcript = fs::read_to_string(run.join("transcript.jsonl")).unwrap();
    assert!(transcript.contains("\"p_cls\""));
    assert!(transcript.contains("exhausted"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "failed");
    assert_eq!(summary["failed_stage"], "solve");
}

fn bench(cwd: &Path, runs: &str, out: &str, parallelism: &str) -> Output {
    let f = fixtures();
    verisolve(
        cwd,
        &[
            "--runs-dir",
            runs,
            "--scripted",
            path(&f.join("bench_scripts")),
            "--generations",
            "1",
            "--parallelism",
            parallelism,
            "bench",
            "--suite",
            path(&f.join("suite")),
            "--trials",
            "2",
            "--out",
            out,
        ],
    )
}

#[test]
fn bench_report_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(dir.path(), "runs-a", "a/report.json", "4");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    for name in [
        "A_pass_a", "A_tool_a", "A_accuracy_a", "A_pass_o", "A_tool_o", "S_train", "S_test", "R_train", "R_test",
        "S_quality", "A_pass", "A_tool",
    ] {
        let stat = &report[name];
        let mean = stat["mean"].as_f64().unwrap_or_else(|| panic!("{name} missing"));
        assert!((0.0..=1.0).contains(&mean), "{name}");
        assert!(stat["std"].is_number());
    }
    assert!((report["S_train"]["mean"].as_f64().unwrap() - 500.0 / 650.0).abs() < 1e-12);
    assert!((report["S_test"]["mean"].as_f64().unwrap() - 0.5675).abs() < 1e-12);
    assert_eq!(report["per_task"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("a/report.txt").is_file());
    assert_eq!(fs::read_to_string(dir.path().join("a/records.jsonl")).unwrap().lines().count(), 8);

    let again = bench(dir.path(), "runs-b", "b/report.json", "1");
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(text, fs::read_to_string(dir.path().join("b/report.json")).unwrap());
}
