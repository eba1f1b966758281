//! Runs methods over a task suite and produces per-trial records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{Map, Value};

use super::kwargs::extract_kwargs;
use super::task::{Instance, TaskSpec};
use super::{BenchError, TrialRecord};
use crate::analyzer::{RefAnswer, TaskType};
use crate::executor::Executor;
use crate::llm::{Gateway, LlmError};
use crate::par::{self, Parallelism};
use crate::pipeline::{Engine, SolveRequest, TRANSCRIPT_FILE};
use crate::registry::ToolSet;
use crate::template::tool_references;
use crate::transcript::Transcript;

pub const ENGINE_METHOD: &str = "engine";
pub const REFERENCE_METHOD: &str = "reference";

/// Builds the gateway one `(task, method)` trial talks to.
pub type GatewayFactory<'a> = dyn Fn(&TaskSpec, &str) -> Result<Gateway, LlmError> + Sync + 'a;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub trials: usize,
    pub methods: Vec<String>,
    pub parallelism: Parallelism,
    /// Worker threads for concurrent trials.
    pub threads: usize,
    pub work_dir: PathBuf,
}

struct Job<'a> {
    task: &'a TaskSpec,
    method: &'a str,
    trial: usize,
}

/// Runs every `(task, method, trial)` combination; records come back sorted
/// by method, task id and trial.
pub fn run_bench(
    engine: &Engine,
    tasks: &[TaskSpec],
    config: &BenchConfig,
    gateway_for: &GatewayFactory<'_>,
) -> Result<Vec<TrialRecord>, BenchError> {
    for m in &config.methods {
        if m != ENGINE_METHOD && m != REFERENCE_METHOD {
            return Err(BenchError::Setup(format!("unknown method `{m}`")));
        }
    }
    let mut jobs = Vec::new();
    for method in &config.methods {
        for task in tasks {
            for trial in 0..config.trials {
                jobs.push(Job { task, method, trial });
            }
        }
    }
    let results = par::with_threads(config.threads, || {
        par::map(config.parallelism, &jobs, |j| {
            let gateway = gateway_for(j.task, j.method)?;
            let dir = config
                .work_dir
                .join(j.method)
                .join(&j.task.id)
                .join(format!("trial-{}", j.trial));
            run_trial(engine, &gateway, j.task, j.method, j.trial, &dir)
        })
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| (&a.method, &a.task_id, a.trial).cmp(&(&b.method, &b.task_id, b.trial)));
    Ok(records)
}

/// Produces one record; a solver that cannot be obtained or executed yields
/// an unexecuted record rather than an error.
pub fn run_trial(
    engine: &Engine,
    gateway: &Gateway,
    task: &TaskSpec,
    method: &str,
    trial: usize,
    dir: &Path,
) -> Result<TrialRecord, BenchError> {
    let started = Instant::now();
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| BenchError::Setup(format!("{}: {e}", dir.display())))?;
    }
    fs::create_dir_all(dir).map_err(|e| BenchError::Setup(format!("{}: {e}", dir.display())))?;
    let dir = dir.canonicalize().map_err(|e| BenchError::Setup(e.to_string()))?;
    let mut tr = Transcript::new();
    tr.scrub_prefix(dir.display().to_string(), "<trial>");

    let code = match method {
        ENGINE_METHOD => {
            let req = SolveRequest {
                task_id: &task.id,
                question: &task.question,
                forced_type: None,
                base_dir: &task.dir,
                kwargs: task.kwargs.clone(),
            };
            let outcome = engine
                .with_gateway(gateway.clone())
                .solve(&req, &dir.join("run"))
                .map_err(|e| BenchError::Setup(e.to_string()))?;
            if !outcome.is_ok() {
                tr.diagnostic("bench", outcome.summary.error.clone().unwrap_or_default());
            }
            let ok = outcome.is_ok();
            outcome.solver.filter(|_| ok)
        }
        _ => Some(task.reference_solver.clone()),
    };

    let mut record = TrialRecord {
        task_id: task.id.clone(),
        method: method.to_string(),
        trial,
        task_type: task.task_type,
        executed: false,
        tools_used: code.as_deref().map(|c| tool_references(c).into_iter().collect()).unwrap_or_default(),
        reference_tools: task.candidate_tools.clone(),
        accuracy: None,
        train_scores: Vec::new(),
        test_scores: Vec::new(),
        wall_time: 0.0,
    };

    if let Some(code) = code {
        let scorer = Scorer {
            executor: engine.executor(&dir.join("work")).map_err(|e| BenchError::Setup(e.to_string()))?,
            tools: engine.all_tools(),
            task,
            private: dir.join("private"),
        };
        let default_run = scorer.executor.run_solver("default", &code, &scorer.tools, &task.kwargs);
        record.executed = matches!(&default_run, Ok(r) if r.is_ok());
        match &default_run {
            Ok(r) => tr.execution("default", r),
            Err(e) => tr.diagnostic("bench", e.to_string()),
        }
        if record.executed {
            match task.task_type {
                TaskType::Assist => {
                    let run = default_run.expect("executed");
                    let score = scorer.score("assist", &run.result_path(), &task.reference, &mut tr);
                    record.accuracy = Some(score);
                }
                TaskType::Opt => {
                    record.train_scores = scorer.instances("train", &task.train_instances, &code, gateway, &mut tr);
                    record.test_scores = scorer.instances("test", &task.test_instances, &code, gateway, &mut tr);
                }
            }
        }
    }
    record.wall_time = started.elapsed().as_secs_f64();
    tr.write_to(&dir.join(TRANSCRIPT_FILE)).map_err(|e| BenchError::Setup(e.to_string()))?;
    Ok(record)
}

struct Scorer<'a> {
    executor: Executor,
    tools: ToolSet,
    task: &'a TaskSpec,
    private: PathBuf,
}

impl Scorer<'_> {
    /// Scores a solver result with the task's evaluator; failures score 0.
    fn score(&self, label: &str, result_path: &Path, reference: &Value, tr: &mut Transcript) -> f64 {
        let answer = RefAnswer::from_payload(reference.clone(), &self.task.dir);
        let reference_path = match answer.materialize(&self.private.join(label)) {
            Ok(p) => p,
            Err(e) => {
                tr.diagnostic("bench", format!("{label}: {e}"));
                return 0.0;
            }
        };
        let binary = self.task.task_type == TaskType::Assist;
        match self
            .executor
            .run_evaluator(&self.task.evaluator, result_path, &reference_path, &self.tools, binary)
        {
            Ok(s) => {
                tr.evaluation(label, Some(s.value), None);
                s.value
            }
            Err(e) => {
                tr.evaluation(label, None, Some(e.to_string()));
                0.0
            }
        }
    }

    fn instances(
        &self,
        subset: &str,
        instances: &[Instance],
        code: &str,
        gateway: &Gateway,
        tr: &mut Transcript,
    ) -> Vec<f64> {
        instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let label = format!("{subset}-{i}");
                let kwargs = match (&inst.kwargs, &inst.question) {
                    (Some(k), _) => k.clone(),
                    (None, Some(q)) => extract_kwargs(q, code, gateway, tr).unwrap_or_else(|e| {
                        tr.diagnostic("kwargs", format!("{label}: {e}"));
                        Map::new()
                    }),
                    (None, None) => Map::new(),
                };
                match self.executor.run_solver(&label, code, &self.tools, &kwargs) {
                    Ok(run) => {
                        tr.execution(&label, &run);
                        if run.is_ok() {
                            self.score(&label, &run.result_path(), &inst.reference, tr)
                        } else {
                            0.0
                        }
                    }
                    Err(e) => {
                        tr.diagnostic("bench", format!("{label}: {e}"));
                        0.0
                    }
                }
            })
            .collect()
    }
}
