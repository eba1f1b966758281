//! Sandboxed subprocess execution of generated scripts.
//!
//! Every run gets a fresh working directory under `workdir_root`, receives its
//! inputs through `args.json`, and reports back through a result manifest:
//!
//! * solvers write `result.json` = `{"status": "ok", "value": ..., "files": [...]}`
//!   or `{"status": "error", "error": "..."}`;
//! * evaluators read `args.json` = `{"result_path", "reference_path"}` and write
//!   `score.json` = `{"score": x}`.
//!
//! The floor enforced here is a private directory, a wall-clock deadline that
//! kills the whole process group, a trimmed environment and capped output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::registry::ToolSet;

pub const ARGS_FILE: &str = "args.json";
pub const RESULT_FILE: &str = "result.json";
pub const SCORE_FILE: &str = "score.json";
pub const TOOLS_MANIFEST: &str = "tools.json";
pub const SHIM_FILE: &str = "tools_shim.py";
pub const SOLVER_FILE: &str = "solver.py";
pub const DRIVER_FILE: &str = "run_solver.py";
pub const EVALUATOR_FILE: &str = "evaluator.py";

/// Python module mapping tool names to subprocess launches.
pub const TOOLS_SHIM: &str = include_str!("../runtime/tools_shim.py");
/// Python driver that calls `solve(tools, **kwargs)` and writes `result.json`.
pub const SOLVER_DRIVER: &str = include_str!("../runtime/run_solver.py");

/// Tail kept from diagnostics fed back into prompts.
pub const ERROR_CAP: usize = 16 * 1024;

/// Slack allowed on top of the configured timeout.
pub const TIMEOUT_GRACE: Duration = Duration::from_secs(2);

const ELISION_MARKER: &str = "[... truncated ...]\n";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("sandbox setup failed: {0}")]
    SandboxSetupFailure(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("script is empty")]
    EmptyScript,
}

#[derive(Debug, Error)]
pub enum EvaluatorError {
    #[error("evaluator crashed: {0}")]
    EvaluatorCrashed(String),
    #[error("evaluator did not write a score: {0}")]
    ScoreMissing(String),
    #[error("binary evaluator produced non-binary score {0}")]
    ScoreNotBinary(f64),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl EvaluatorError {
    /// Diagnostic text handed to the referee.
    pub fn diagnostics(&self) -> String {
        self.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Command with exactly one `{script}` placeholder, split on whitespace.
    pub runner_template: String,
    pub timeout: Duration,
    pub workdir_root: PathBuf,
    pub stdout_cap: usize,
    pub env_allowlist: Vec<String>,
    pub deny_network: bool,
    pub max_parallel: usize,
}

impl RunConfig {
    pub fn new(workdir_root: impl Into<PathBuf>) -> Self {
        Self {
            runner_template: "python3 {script}".into(),
            timeout: Duration::from_secs(600),
            workdir_root: workdir_root.into(),
            stdout_cap: 64 * 1024,
            env_allowlist: ["PATH", "LANG", "LC_ALL", "LC_CTYPE"]
                .map(String::from)
                .to_vec(),
            deny_network: false,
            max_parallel: 4,
        }
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        let count = self.runner_template.matches("{script}").count();
        if count != 1 {
            return Err(ExecError::InvalidConfig(format!(
                "runner template must contain exactly one {{script}} placeholder, found {count}"
            )));
        }
        if self.timeout.is_zero() {
            return Err(ExecError::InvalidConfig("timeout must be positive".into()));
        }
        if self.stdout_cap == 0 || self.max_parallel == 0 {
            return Err(ExecError::InvalidConfig(
                "stdout_cap and max_parallel must be positive".into(),
            ));
        }
        Ok(())
    }

    fn argv(&self, script: &str) -> Vec<String> {
        let mut argv: Vec<String> = Vec::new();
        if self.deny_network && cfg!(target_os = "linux") {
            argv.extend(["unshare".to_string(), "-rn".to_string()]);
        }
        argv.extend(
            self.runner_template
                .split_whitespace()
                .map(|t| t.replace("{script}", script)),
        );
        argv
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionStatus {
    Ok,
    Error,
    Timeout,
}

/// Outcome of one script run: `r` on success, `ε` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecutionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_payload: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_text: Option<String>,
    pub stdout_tail: String,
    pub stderr_tail: String,
    pub wall_time: f64,
    pub workdir: PathBuf,
}

impl ExecutionResult {
    pub fn is_ok(&self) -> bool {
        self.status == ExecutionStatus::Ok
    }

    /// Path of the result manifest written by the run.
    pub fn result_path(&self) -> PathBuf {
        self.workdir.join(RESULT_FILE)
    }

    /// Error text for debug prompts, or an empty string on success.
    pub fn diagnostics(&self) -> String {
        self.error_text.clone().unwrap_or_default()
    }
}

/// Keeps the final `cap` bytes of `text`, prefixed with an elision marker when
/// anything was dropped.
pub fn truncate_diagnostics(text: &str, cap: usize) -> String {
    assert!(cap > 0, "cap must be positive");
    if text.len() <= cap {
        return text.to_string();
    }
    let mut start = text.len() - cap;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    format!("{ELISION_MARKER}{}", &text[start..])
}

/// A script plus supporting files to materialize in a fresh workdir.
#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    pub script_name: String,
    pub files: Vec<(String, String)>,
    pub args: Value,
    /// Directory copied into the workdir before `files` are written.
    pub copy_from: Option<PathBuf>,
}

impl Job {
    pub fn script(label: &str, code: &str, inputs: &Map<String, Value>) -> Self {
        Self {
            label: label.to_string(),
            script_name: "script.py".into(),
            files: vec![("script.py".into(), code.to_string())],
            args: Value::Object(inputs.clone()),
            copy_from: None,
        }
    }
}

/// `tools.json` content mapping names to absolute tool directories.
pub fn tools_manifest(tools: &ToolSet) -> Value {
    let mut map = Map::new();
    for handle in tools.iter() {
        map.insert(
            handle.name().to_string(),
            json!({"root": handle.root_dir.display().to_string(), "entry": handle.entry()}),
        );
    }
    Value::Object(map)
}

/// Job running `solve(tools, **kwargs)` from `code` through the driver.
pub fn solver_job(label: &str, code: &str, tools: &ToolSet, kwargs: &Map<String, Value>) -> Job {
    Job {
        label: label.to_string(),
        script_name: DRIVER_FILE.into(),
        files: vec![
            (SOLVER_FILE.into(), code.to_string()),
            (SHIM_FILE.into(), TOOLS_SHIM.into()),
            (DRIVER_FILE.into(), SOLVER_DRIVER.into()),
            (
                TOOLS_MANIFEST.into(),
                serde_json::to_string_pretty(&tools_manifest(tools)).expect("manifest serializes"),
            ),
        ],
        args: json!({"kwargs": kwargs, "tools_manifest": TOOLS_MANIFEST}),
        copy_from: None,
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cond: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *permits == 0 {
            permits = self.cond.wait(permits).unwrap_or_else(|e| e.into_inner());
        }
        *permits -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *permits += 1;
        self.0.cond.notify_one();
    }
}

struct RawRun {
    exit_code: Option<i32>,
    timed_out: bool,
    stdout: String,
    stderr: String,
    wall_time: f64,
}

fn spawn_tail_reader<R: Read + Send + 'static>(mut source: R, cap: usize) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut kept: Vec<u8> = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match source.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    kept.extend_from_slice(&buf[..n]);
                    if kept.len() > 2 * cap {
                        kept.drain(..kept.len() - cap);
                    }
                }
            }
        }
        if kept.len() > cap {
            kept.drain(..kept.len() - cap);
        }
        let _ = tx.send(kept);
    });
    rx
}

/// Runs scripts in private working directories with a parallelism limit.
pub struct Executor {
    config: RunConfig,
    seq: AtomicU64,
    slots: Semaphore,
}

impl Executor {
    pub fn new(config: RunConfig) -> Result<Self, ExecError> {
        config.validate()?;
        fs::create_dir_all(&config.workdir_root)
            .map_err(|e| ExecError::SandboxSetupFailure(format!("{}: {e}", config.workdir_root.display())))?;
        let slots = Semaphore::new(config.max_parallel);
        Ok(Self {
            config,
            seq: AtomicU64::new(0),
            slots,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn fresh_workdir(&self, label: &str) -> Result<PathBuf, ExecError> {
        let safe: String = label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        loop {
            let n = self.seq.fetch_add(1, Ordering::SeqCst);
            let dir = self.config.workdir_root.join(format!("{safe}-{n:04}"));
            match fs::create_dir(&dir) {
                Ok(()) => {
                    return fs::canonicalize(&dir)
                        .map_err(|e| ExecError::SandboxSetupFailure(e.to_string()))
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => {
                    return Err(ExecError::SandboxSetupFailure(format!("{}: {e}", dir.display())))
                }
            }
        }
    }

    fn materialize(&self, job: &Job) -> Result<PathBuf, ExecError> {
        let workdir = self.fresh_workdir(&job.label)?;
        let setup = |e: std::io::Error| ExecError::SandboxSetupFailure(e.to_string());
        if let Some(src) = &job.copy_from {
            copy_dir_all(src, &workdir).map_err(setup)?;
        }
        for (name, content) in &job.files {
            fs::write(workdir.join(name), content).map_err(setup)?;
        }
        let args = serde_json::to_string_pretty(&job.args).expect("args serialize");
        fs::write(workdir.join(ARGS_FILE), args).map_err(setup)?;
        fs::create_dir_all(workdir.join("tmp")).map_err(setup)?;
        Ok(workdir)
    }

    fn spawn(&self, workdir: &Path, script: &str) -> Result<RawRun, ExecError> {
        let argv = self.config.argv(script);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(workdir)
            .env_clear()
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        for var in &self.config.env_allowlist {
            if let Ok(value) = std::env::var(var) {
                cmd.env(var, value);
            }
        }
        cmd.env("HOME", workdir)
            .env("TMPDIR", workdir.join("tmp"))
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONUNBUFFERED", "1");

        let start = Instant::now();
        let mut child = cmd
            .spawn()
            .map_err(|e| ExecError::SandboxSetupFailure(format!("cannot spawn `{}`: {e}", argv[0])))?;
        let cap = self.config.stdout_cap;
        let out_rx = spawn_tail_reader(child.stdout.take().expect("piped stdout"), cap);
        let err_rx = spawn_tail_reader(child.stderr.take().expect("piped stderr"), cap);

        let deadline = start + self.config.timeout;
        let mut timed_out = false;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => {
                    timed_out = true;
                    // negative pid targets the whole process group
                    unsafe {
                        libc::kill(-(child.id() as i32), libc::SIGKILL);
                    }
                    let _ = child.kill();
                    break child.wait().ok();
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(ExecError::SandboxSetupFailure(e.to_string())),
            }
        };
        let collect = |rx: mpsc::Receiver<Vec<u8>>| {
            rx.recv_timeout(Duration::from_millis(500))
                .map(|b| String::from_utf8_lossy(&b).into_owned())
                .unwrap_or_default()
        };
        let stdout = collect(out_rx);
        let stderr = collect(err_rx);
        Ok(RawRun {
            exit_code: status.and_then(|s| s.code()),
            timed_out,
            stdout,
            stderr,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    fn scrub(workdir: &Path, text: &str) -> String {
        text.replace(&workdir.display().to_string(), "<workdir>")
    }

    /// Materializes `job`, runs it and interprets `result.json`.
    pub fn run_job(&self, job: &Job) -> Result<ExecutionResult, ExecError> {
        if job.copy_from.is_none() && job.files.iter().all(|(_, c)| c.trim().is_empty()) {
            return Err(ExecError::EmptyScript);
        }
        let _permit = self.slots.acquire();
        let workdir = self.materialize(job)?;
        let raw = self.spawn(&workdir, &job.script_name)?;
        let stdout_tail = Self::scrub(&workdir, &raw.stdout);
        let stderr_tail = Self::scrub(&workdir, &raw.stderr);
        let err_tail = truncate_diagnostics(&stderr_tail, ERROR_CAP);

        let (status, payload, error) = if raw.timed_out {
            let msg = format!(
                "timed out after {:.1}s\n{err_tail}",
                self.config.timeout.as_secs_f64()
            );
            (ExecutionStatus::Timeout, None, Some(msg))
        } else if raw.exit_code != Some(0) {
            let mut msg = err_tail.clone();
            if msg.trim().is_empty() {
                msg = match raw.exit_code {
                    Some(c) => format!("process exited with code {c}"),
                    None => "process terminated by a signal".to_string(),
                };
            }
            (ExecutionStatus::Error, None, Some(msg))
        } else {
            match read_result_manifest(&workdir) {
                Ok(v) => (ExecutionStatus::Ok, Some(v), None),
                Err(msg) => (
                    ExecutionStatus::Error,
                    None,
                    Some(Self::scrub(&workdir, &format!("{msg}\n{err_tail}"))),
                ),
            }
        };
        Ok(ExecutionResult {
            status,
            result_payload: payload,
            error_text: error.map(|e| truncate_diagnostics(&e, ERROR_CAP)),
            stdout_tail,
            stderr_tail,
            wall_time: raw.wall_time,
            workdir,
        })
    }

    /// Runs a standalone script; `inputs` become `args.json`.
    pub fn run_script(&self, code: &str, inputs: &Map<String, Value>) -> Result<ExecutionResult, ExecError> {
        if code.trim().is_empty() {
            return Err(ExecError::EmptyScript);
        }
        self.run_job(&Job::script("script", code, inputs))
    }

    /// Runs `solve(tools, **kwargs)` from `code` through the driver.
    pub fn run_solver(
        &self,
        label: &str,
        code: &str,
        tools: &ToolSet,
        kwargs: &Map<String, Value>,
    ) -> Result<ExecutionResult, ExecError> {
        if code.trim().is_empty() {
            return Err(ExecError::EmptyScript);
        }
        self.run_job(&solver_job(label, code, tools, kwargs))
    }

    /// Runs an evaluator against a result manifest and a reference file.
    /// Scores are clamped into [0, 1]; `binary` additionally requires 0 or 1.
    pub fn run_evaluator(
        &self,
        evaluator_code: &str,
        result_path: &Path,
        reference_path: &Path,
        tools: &ToolSet,
        binary: bool,
    ) -> Result<Score, EvaluatorError> {
        for p in [result_path, reference_path] {
            if !p.exists() {
                return Err(ExecError::SandboxSetupFailure(format!("missing input {}", p.display())).into());
            }
        }
        if evaluator_code.trim().is_empty() {
            return Err(ExecError::EmptyScript.into());
        }
        let job = Job {
            label: "evaluate".into(),
            script_name: EVALUATOR_FILE.into(),
            files: vec![
                (EVALUATOR_FILE.into(), evaluator_code.to_string()),
                (SHIM_FILE.into(), TOOLS_SHIM.into()),
                (
                    TOOLS_MANIFEST.into(),
                    serde_json::to_string_pretty(&tools_manifest(tools)).expect("manifest serializes"),
                ),
            ],
            args: json!({
                "result_path": result_path.display().to_string(),
                "reference_path": reference_path.display().to_string(),
            }),
            copy_from: None,
        };
        let _permit = self.slots.acquire();
        let workdir = self.materialize(&job)?;
        let raw = self.spawn(&workdir, &job.script_name)?;
        let stderr = truncate_diagnostics(&Self::scrub(&workdir, &raw.stderr), ERROR_CAP);
        if raw.timed_out {
            return Err(EvaluatorError::EvaluatorCrashed(format!("evaluator timed out\n{stderr}")));
        }
        if raw.exit_code != Some(0) {
            let msg = if stderr.trim().is_empty() {
                format!("evaluator exited with {:?}", raw.exit_code)
            } else {
                stderr
            };
            return Err(EvaluatorError::EvaluatorCrashed(msg));
        }
        let raw_score = read_score(&workdir.join(SCORE_FILE)).map_err(EvaluatorError::ScoreMissing)?;
        if binary && raw_score != 0.0 && raw_score != 1.0 {
            return Err(EvaluatorError::ScoreNotBinary(raw_score));
        }
        Ok(Score {
            value: raw_score.clamp(0.0, 1.0),
            raw: raw_score,
            wall_time: raw.wall_time,
        })
    }
}

/// A clamped evaluator score together with the value the evaluator emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub raw: f64,
    pub wall_time: f64,
}

fn read_result_manifest(workdir: &Path) -> Result<Value, String> {
    let path = workdir.join(RESULT_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|_| "script exited cleanly but did not write result.json".to_string())?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("result.json is not valid JSON: {e}"))?;
    match doc.get("status").and_then(Value::as_str) {
        Some("ok") => Ok(doc
            .get("value")
            .or_else(|| doc.get("files"))
            .cloned()
            .unwrap_or(Value::Null)),
        Some("error") => Err(format!(
            "script reported error: {}",
            doc.get("error").and_then(Value::as_str).unwrap_or("<no message>")
        )),
        _ => Err("result.json lacks a valid \"status\" field".into()),
    }
}

fn read_score(path: &Path) -> Result<f64, String> {
    let text = fs::read_to_string(path).map_err(|_| "score.json not written".to_string())?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("score.json is not valid JSON: {e}"))?;
    let score = doc
        .get("score")
        .and_then(Value::as_f64)
        .ok_or_else(|| "score.json lacks a numeric \"score\" field".to_string())?;
    if !score.is_finite() {
        return Err(format!("score {score} is not finite"));
    }
    Ok(score)
}

/// Recursively copies `src` into `dest`, skipping bytecode caches.
pub fn copy_dir_all(src: &Path, dest: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dest)?;
    let mut entries: Vec<_> = fs::read_dir(src)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name();
        if name == "__pycache__" {
            continue;
        }
        let from = entry.path();
        let to = dest.join(&name);
        if fs::metadata(&from)?.is_dir() {
            copy_dir_all(&from, &to)?;
        } else {
            fs::copy(&from, &to)?;
        }
    }
    Ok(())
}

/// Inputs map helper: `{name: path}` as JSON strings.
pub fn path_inputs(inputs: &BTreeMap<String, PathBuf>) -> Map<String, Value> {
    inputs
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(v.display().to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn executor(dir: &Path) -> Executor {
        let mut cfg = RunConfig::new(dir.join("work"));
        cfg.timeout = Duration::from_secs(20);
        Executor::new(cfg).unwrap()
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_diagnostics("short", 100), "short");
        assert_eq!(truncate_diagnostics("", 10), "");
        let text: String = (0..200).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let out = truncate_diagnostics(&text, 100);
        assert!(out.len() <= 100 + ELISION_MARKER.len());
        assert!(out.ends_with(&text[100..]));
        assert!(out.starts_with(ELISION_MARKER));
        // multi-byte boundary
        let wide = "é".repeat(100);
        let out = truncate_diagnostics(&wide, 51);
        assert!(out.ends_with('é'));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::new("/tmp/x");
        cfg.runner_template = "python3 {script} {script}".into();
        assert!(cfg.validate().is_err());
        cfg.runner_template = "python3".into();
        assert!(cfg.validate().is_err());
        cfg.runner_template = "python3 {script}".into();
        cfg.timeout = Duration::ZERO;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ok_result_is_parsed() {
        let dir = tempfile::tempdir().unwrap();
        let ex = executor(dir.path());
        let code = "import json\njson.dump({'status': 'ok', 'value': 42}, open('result.json', 'w'))\n";
        let r = ex.run_script(code, &Map::new()).unwrap();
        assert_eq!(r.status, ExecutionStatus::Ok, "{r:?}");
        assert_eq!(r.result_payload, Some(json!(42)));
        assert!(r.error_text.is_none());
    }

    #[test]
    fn nonzero_exit_captures_message() {
        let dir = tempfile::tempdir().unwrap();
        let ex = executor(dir.path());
        let code = "import sys\nsys.stderr.write('boom: unit mismatch\\n')\nsys.exit(3)\n";
        let r = ex.run_script(code, &Map::new()).unwrap();
        assert_eq!(r.status, ExecutionStatus::Error);
        assert!(r.error_text.unwrap().contains("boom: unit mismatch"));
        assert!(r.result_payload.is_none());
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let ex = executor(dir.path());
        let r = ex.run_script("print('hi')\n", &Map::new()).unwrap();
        assert_eq!(r.status, ExecutionStatus::Error);
        assert_eq!(r.stdout_tail.trim(), "hi");
    }

    #[test]
    fn inputs_are_exposed_through_args() {
        let dir = tempfile::tempdir().unwrap();
        let ex = executor(dir.path());
        let code = "import json\na = json.load(open('args.json'))\njson.dump({'status': 'ok', 'value': a['n'] * 2}, open('result.json', 'w'))\n";
        let mut inputs = Map::new();
        inputs.insert("n".into(), json!(21));
        let r = ex.run_script(code, &inputs).unwrap();
        assert_eq!(r.result_payload, Some(json!(42)));
    }

    #[test]
    fn evaluator_scores_are_clamped_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let ex = executor(dir.path());
        let result = dir.path().join("result.json");
        let reference = dir.path().join("reference.json");
        fs::write(&result, r#"{"status":"ok","value":1}"#).unwrap();
        fs::write(&reference, "null").unwrap();
        let tools = ToolSet::new(crate::registry::ToolKind::Eval);
        let emit = |x: &str| format!("import json\njson.dump({{'score': {x}}}, open('score.json', 'w'))\n");

        let s = ex.run_evaluator(&emit("1"), &result, &reference, &tools, true).unwrap();
        assert_eq!(s.value, 1.0);
        let s = ex.run_evaluator(&emit("1.7"), &result, &reference, &tools, false).unwrap();
        assert_eq!((s.value, s.raw), (1.0, 1.7));
        assert!(matches!(
            ex.run_evaluator(&emit("0.5"), &result, &reference, &tools, true),
            Err(EvaluatorError::ScoreNotBinary(_))
        ));
        let crash = "assert False, 'value must be positive'\n";
        match ex.run_evaluator(crash, &result, &reference, &tools, false) {
            Err(EvaluatorError::EvaluatorCrashed(msg)) => assert!(msg.contains("value must be positive")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ex.run_evaluator("pass\n", &result, &reference, &tools, false),
            Err(EvaluatorError::ScoreMissing(_))
        ));
    }
}
