//! Benchmark task directories: `task.json` plus a reference solver and an
//! evaluator script.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::BenchError;
use crate::analyzer::TaskType;

pub const TASK_FILE: &str = "task.json";
pub const REFERENCE_SOLVER_FILE: &str = "solve.py";
pub const EVALUATOR_SCRIPT_FILE: &str = "evaluate.py";

/// One (kwargs, reference) pair of an optimization task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Natural-language variant of the task for this instance; used to
    /// extract kwargs when `kwargs` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kwargs: Option<Map<String, Value>>,
    pub reference: Value,
}

/// The on-disk `task.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub id: String,
    pub question: String,
    pub task_type: TaskType,
    #[serde(default)]
    pub candidate_tools: Vec<String>,
    /// Expected answer of an assistant task.
    #[serde(default)]
    pub reference: Value,
    #[serde(default)]
    pub kwargs: Map<String, Value>,
    #[serde(default)]
    pub train_instances: Vec<Instance>,
    #[serde(default)]
    pub test_instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub question: String,
    pub task_type: TaskType,
    pub candidate_tools: Vec<String>,
    pub reference_solver: String,
    pub evaluator: String,
    pub reference: Value,
    pub kwargs: Map<String, Value>,
    pub train_instances: Vec<Instance>,
    pub test_instances: Vec<Instance>,
    pub dir: PathBuf,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty task id".into());
        }
        if self.question.trim().is_empty() {
            return Err("empty question".into());
        }
        match self.task_type {
            TaskType::Assist if !(self.train_instances.is_empty() && self.test_instances.is_empty()) => {
                Err("assistant tasks take no train/test instances".into())
            }
            TaskType::Opt if self.train_instances.is_empty() || self.test_instances.is_empty() => {
                Err("optimization tasks need non-empty train and test instances".into())
            }
            _ => Ok(()),
        }
    }

    pub fn reference_tools(&self) -> BTreeSet<String> {
        self.candidate_tools.iter().cloned().collect()
    }
}

fn load_error(path: &Path, reason: impl ToString) -> BenchError {
    BenchError::TaskLoad {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

pub fn load_task(dir: &Path) -> Result<TaskSpec, BenchError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| load_error(&p, e))
    };
    let file: TaskFile = serde_json::from_str(&read(TASK_FILE)?).map_err(|e| load_error(&dir.join(TASK_FILE), e))?;
    let task = TaskSpec {
        id: file.id,
        question: file.question,
        task_type: file.task_type,
        candidate_tools: file.candidate_tools,
        reference_solver: read(REFERENCE_SOLVER_FILE)?,
        evaluator: read(EVALUATOR_SCRIPT_FILE)?,
        reference: file.reference,
        kwargs: file.kwargs,
        train_instances: file.train_instances,
        test_instances: file.test_instances,
        dir: dir.to_path_buf(),
    };
    task.validate().map_err(|r| load_error(dir, r))?;
    Ok(task)
}

/// Loads every immediate subdirectory of `suite` holding a `task.json`,
/// ordered by task id.
pub fn load_suite(suite: &Path) -> Result<Vec<TaskSpec>, BenchError> {
    let entries = fs::read_dir(suite).map_err(|e| load_error(suite, e))?;
    let mut tasks = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| load_error(suite, e))?.path();
        if path.join(TASK_FILE).is_file() {
            tasks.push(load_task(&path)?);
        }
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = tasks.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(load_error(suite, format!("duplicate task id `{}`", w[0].id)));
    }
    if tasks.is_empty() {
        return Err(load_error(suite, "no task directories found"));
    }
    Ok(tasks)
}
