//! Benchmark harness: task directories, trial execution, the metric suite
//! and multi-trial reports.
//!
//! A task directory holds `task.json`, a reference solver `solve.py` and an
//! evaluator `evaluate.py` following the evaluator args contract. Every
//! method is run for each task and trial; records are then folded into a
//! [`MetricsReport`].

mod kwargs;
pub mod metrics;
mod report;
mod runner;
mod task;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::TaskType;
use crate::llm::LlmError;
use crate::transcript::write_jsonl;

pub use kwargs::{extract_kwargs, filter_declared, parse_kwargs_reply};
pub use metrics::{
    mean_tool_accuracy, normalized_rank, output_accuracy, overall, pass_at_1, quality_score, rank_score, subset_score,
    task_subset_mean, tool_accuracy, MethodMetrics, Metrics, Subset, METRIC_NAMES,
};
pub use report::{aggregate, build_report, mean_std, render_table, MetricStats, MetricsReport, Stat, TaskBreakdown};
pub use runner::{run_bench, run_trial, BenchConfig, GatewayFactory, ENGINE_METHOD, REFERENCE_METHOD};
pub use task::{load_suite, load_task, Instance, TaskFile, TaskSpec, EVALUATOR_SCRIPT_FILE, REFERENCE_SOLVER_FILE, TASK_FILE};

pub const REPORT_TABLE_FILE: &str = "report.txt";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no {0} tasks")]
    NoTasks(TaskType),
    #[error("no optimization tasks")]
    NoOptTasks,
    #[error("inconsistent trials: {0}")]
    InconsistentTrials(String),
    #[error("could not parse kwargs: {0}")]
    KwargsParseError(String),
    #[error("cannot load task at {path}: {reason}")]
    TaskLoad { path: PathBuf, reason: String },
    #[error("bench setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One task run of one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task_id: String,
    pub method: String,
    pub trial: usize,
    pub task_type: TaskType,
    /// The solver ran to completion with its default parameters.
    pub executed: bool,
    pub tools_used: Vec<String>,
    pub reference_tools: Vec<String>,
    /// Evaluator score of an assistant task; `None` when not executed.
    pub accuracy: Option<f64>,
    pub train_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
    pub wall_time: f64,
}

/// Reads records written by a previous bench run.
pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| BenchError::TaskLoad {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Writes `report_path` (JSON), a sibling `report.txt` table and
/// `records.jsonl`.
pub fn write_outputs(report: &MetricsReport, records: &[TrialRecord], report_path: &Path) -> Result<(), BenchError> {
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(report_path, json + "\n")?;
    let dir = report_path.parent().unwrap_or(Path::new("."));
    fs::write(dir.join(REPORT_TABLE_FILE), render_table(report))?;
    write_jsonl(&dir.join(RECORDS_FILE), records)?;
    Ok(())
}
