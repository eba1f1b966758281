//! Multi-trial aggregation of benchmark records into a [`MetricsReport`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{method_metrics, normalized_rank, task_subset_mean, tool_accuracy, MethodMetrics, Metrics, Subset, METRIC_NAMES};
use super::{BenchError, TrialRecord};
use crate::analyzer::TaskType;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Stat {
    assert!(!values.is_empty(), "mean_std of an empty list");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Stat { mean, std: var.sqrt() }
}

pub type MetricStats = Metrics<Stat>;

/// Aggregates per-trial values; a metric missing in any trial stays `None`.
pub fn aggregate(per_trial: &[MethodMetrics]) -> MetricStats {
    let columns: Vec<[Option<f64>; 12]> = per_trial.iter().map(Metrics::values).collect();
    let stats: [Option<Stat>; 12] = std::array::from_fn(|i| {
        let vals: Option<Vec<f64>> = columns.iter().map(|c| c[i]).collect();
        vals.filter(|v| !v.is_empty()).map(|v| mean_std(&v))
    });
    Metrics::from_values(stats)
}

/// Per-(method, task) statistics across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBreakdown {
    pub task_id: String,
    pub method: String,
    pub task_type: TaskType,
    pub executed: Stat,
    pub tool_accuracy: Stat,
    pub accuracy: Option<Stat>,
    pub train_score: Option<Stat>,
    pub test_score: Option<Stat>,
    pub train_rank: Option<Stat>,
    pub test_rank: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub trials: usize,
    pub primary_method: String,
    pub methods: Vec<String>,
    /// Metrics of the primary method.
    #[serde(flatten)]
    pub metrics: MetricStats,
    pub by_method: BTreeMap<String, MetricStats>,
    pub per_trial: BTreeMap<String, Vec<MethodMetrics>>,
    pub per_task: Vec<TaskBreakdown>,
}

/// Indexes records by `(method, task)` and checks every pair has exactly
/// trials `0..trials` with a consistent task type.
fn index_records<'a>(
    records: &'a [TrialRecord],
    trials: usize,
) -> Result<BTreeMap<(&'a str, &'a str), Vec<&'a TrialRecord>>, BenchError> {
    if trials == 0 {
        return Err(BenchError::InconsistentTrials("trial count must be positive".into()));
    }
    let methods: BTreeSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
    let tasks: BTreeMap<&str, TaskType> = records.iter().map(|r| (r.task_id.as_str(), r.task_type)).collect();
    if let Some(r) = records.iter().find(|r| tasks[r.task_id.as_str()] != r.task_type) {
        return Err(BenchError::InconsistentTrials(format!("task `{}` has mixed task types", r.task_id)));
    }
    let mut index: BTreeMap<(&str, &str), Vec<Option<&TrialRecord>>> = BTreeMap::new();
    for m in &methods {
        for t in tasks.keys() {
            index.insert((m, t), vec![None; trials]);
        }
    }
    for r in records {
        let slots = index.get_mut(&(r.method.as_str(), r.task_id.as_str())).expect("indexed");
        match slots.get_mut(r.trial) {
            None => {
                return Err(BenchError::InconsistentTrials(format!(
                    "trial {} of `{}`/`{}` exceeds the trial count {trials}",
                    r.trial, r.method, r.task_id
                )))
            }
            Some(Some(_)) => {
                return Err(BenchError::InconsistentTrials(format!(
                    "duplicate trial {} for `{}`/`{}`",
                    r.trial, r.method, r.task_id
                )))
            }
            Some(slot) => *slot = Some(r),
        }
    }
    index
        .into_iter()
        .map(|((m, t), slots)| {
            let missing: Vec<usize> = slots.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i).collect();
            if missing.is_empty() {
                Ok(((m, t), slots.into_iter().flatten().collect()))
            } else {
                Err(BenchError::InconsistentTrials(format!("`{m}`/`{t}` is missing trials {missing:?}")))
            }
        })
        .collect()
}

pub fn build_report(records: &[TrialRecord], trials: usize, primary: &str) -> Result<MetricsReport, BenchError> {
    let index = index_records(records, trials)?;
    let methods: Vec<String> = index.keys().map(|(m, _)| m.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let tasks: Vec<&str> = index.keys().map(|(_, t)| *t).collect::<BTreeSet<_>>().into_iter().collect();
    if !methods.iter().any(|m| m == primary) {
        return Err(BenchError::InconsistentTrials(format!("no records for primary method `{primary}`")));
    }

    let trial_view = |trial: usize| -> BTreeMap<String, Vec<&TrialRecord>> {
        methods
            .iter()
            .map(|m| (m.clone(), tasks.iter().map(|t| index[&(m.as_str(), *t)][trial]).collect()))
            .collect()
    };
    let mut per_trial: BTreeMap<String, Vec<MethodMetrics>> = BTreeMap::new();
    for trial in 0..trials {
        let view = trial_view(trial);
        for m in &methods {
            per_trial.entry(m.clone()).or_default().push(method_metrics(&view, m)?);
        }
    }
    let by_method: BTreeMap<String, MetricStats> = per_trial.iter().map(|(m, v)| (m.clone(), aggregate(v))).collect();

    let mut per_task = Vec::new();
    for m in &methods {
        let me = methods.iter().position(|x| x == m).expect("listed");
        for t in &tasks {
            let recs = &index[&(m.as_str(), *t)];
            let tau = recs[0].task_type;
            let over = |f: &dyn Fn(&TrialRecord) -> f64| mean_std(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let rank = |subset: Subset| {
                let ranks: Vec<f64> = (0..trials)
                    .map(|trial| {
                        let scores: Vec<f64> =
                            methods.iter().map(|x| task_subset_mean(index[&(x.as_str(), *t)][trial], subset)).collect();
                        normalized_rank(&scores)[me]
                    })
                    .collect();
                mean_std(&ranks)
            };
            let opt = tau == TaskType::Opt;
            per_task.push(TaskBreakdown {
                task_id: t.to_string(),
                method: m.clone(),
                task_type: tau,
                executed: over(&|r| if r.executed { 1.0 } else { 0.0 }),
                tool_accuracy: over(&|r| {
                    tool_accuracy(
                        &r.tools_used.iter().cloned().collect(),
                        &r.reference_tools.iter().cloned().collect(),
                    )
                }),
                accuracy: (!opt).then(|| over(&|r| r.accuracy.unwrap_or(0.0))),
                train_score: opt.then(|| over(&|r| task_subset_mean(r, Subset::Train))),
                test_score: opt.then(|| over(&|r| task_subset_mean(r, Subset::Test))),
                train_rank: opt.then(|| rank(Subset::Train)),
                test_rank: opt.then(|| rank(Subset::Test)),
            });
        }
    }

    Ok(MetricsReport {
        trials,
        primary_method: primary.to_string(),
        methods,
        metrics: by_method[primary].clone(),
        by_method,
        per_trial,
        per_task,
    })
}

/// Plain-text table: one row per metric, one column per method.
pub fn render_table(report: &MetricsReport) -> String {
    let cell = |s: &Option<Stat>| match s {
        Some(s) => format!("{:.3} ± {:.3}", s.mean, s.std),
        None => "n/a".to_string(),
    };
    let mut out = String::new();
    let _ = write!(out, "{:<14}", "metric");
    for m in &report.methods {
        let _ = write!(out, " {m:>17}");
    }
    out.push('\n');
    let columns: Vec<[Option<Stat>; 12]> = report.methods.iter().map(|m| report.by_method[m].values()).collect();
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let _ = write!(out, "{name:<14}");
        for col in &columns {
            let _ = write!(out, " {:>17}", cell(&col[i]));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "({} trials; primary method: {})", report.trials, report.primary_method);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(task: &str, method: &str, trial: usize, tau: TaskType, executed: bool, test: f64) -> TrialRecord {
        TrialRecord {
            task_id: task.into(),
            method: method.into(),
            trial,
            task_type: tau,
            executed,
            tools_used: vec!["A".into()],
            reference_tools: vec!["A".into()],
            accuracy: executed.then_some(1.0),
            train_scores: if tau == TaskType::Opt { vec![test] } else { vec![] },
            test_scores: if tau == TaskType::Opt { vec![test] } else { vec![] },
            wall_time: 0.0,
        }
    }

    fn suite(trials: usize, flip: bool) -> Vec<TrialRecord> {
        let mut out = Vec::new();
        for t in 0..trials {
            let exec = !(flip && t == 1);
            out.push(rec("a", "engine", t, TaskType::Assist, exec, 0.0));
            out.push(rec("o", "engine", t, TaskType::Opt, true, 0.9));
            out.push(rec("a", "reference", t, TaskType::Assist, true, 0.0));
            out.push(rec("o", "reference", t, TaskType::Opt, true, 0.4));
        }
        out
    }

    #[test]
    fn population_std() {
        let s = mean_std(&[0.4, 0.6]);
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert!((s.std - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_trials_have_zero_std() {
        let report = build_report(&suite(3, false), 3, "engine").unwrap();
        for s in report.metrics.values() {
            assert_eq!(s.unwrap().std, 0.0);
        }
        assert_eq!(report.metrics.r_test.unwrap().mean, 1.0);
        assert_eq!(report.by_method["reference"].r_test.unwrap().mean, 0.0);
    }

    #[test]
    fn varying_trial_gives_spread() {
        let report = build_report(&suite(2, true), 2, "engine").unwrap();
        let pass = report.metrics.a_pass_a.unwrap();
        assert!((pass.mean - 0.5).abs() < 1e-15 && (pass.std - 0.5).abs() < 1e-15);
        let json = serde_json::to_value(&report).unwrap();
        for name in METRIC_NAMES {
            assert!(json.get(name).is_some(), "{name}");
        }
        assert!(render_table(&report).contains("S_quality"));
    }

    #[test]
    fn missing_trial_is_inconsistent() {
        let mut records = suite(3, false);
        records.retain(|r| !(r.task_id == "o" && r.method == "reference" && r.trial == 2));
        assert!(matches!(build_report(&records, 3, "engine"), Err(BenchError::InconsistentTrials(_))));
        let mut dup = suite(2, false);
        dup.push(dup[0].clone());
        assert!(matches!(build_report(&dup, 2, "engine"), Err(BenchError::InconsistentTrials(_))));
        assert!(build_report(&suite(2, false), 2, "other").is_err());
    }

    #[test]
    fn assist_only_suite_reports_null_opt_metrics() {
        let records: Vec<_> = suite(1, false).into_iter().filter(|r| r.task_type == TaskType::Assist).collect();
        let report = build_report(&records, 1, "engine").unwrap();
        assert!(report.metrics.s_train.is_none() && report.metrics.s_quality.is_none());
        assert_eq!(report.metrics.a_pass_a.unwrap().mean, 1.0);
    }

    proptest! {
        #[test]
        fn every_metric_in_unit_interval(
            flags in prop::collection::vec((any::<bool>(), 0.0f64..=1.0, 0.0f64..=1.0), 4),
            trials in 1usize..3,
        ) {
            let mut records = Vec::new();
            for t in 0..trials {
                for (i, (exec, s, acc)) in flags.iter().enumerate() {
                    let tau = if i % 2 == 0 { TaskType::Assist } else { TaskType::Opt };
                    let mut r = rec(&format!("t{i}"), "engine", t, tau, *exec, *s);
                    r.accuracy = exec.then_some(*acc);
                    records.push(r.clone());
                    r.method = "reference".into();
                    r.test_scores = vec![1.0 - s];
                    records.push(r);
                }
            }
            let report = build_report(&records, trials, "engine").unwrap();
            for stats in report.by_method.values() {
                for s in stats.values().into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&s.mean));
                }
            }
        }
    }
}
