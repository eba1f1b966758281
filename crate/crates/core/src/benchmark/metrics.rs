//! The benchmark metric suite over per-trial records.
//!
//! All functions take the records of one method and one trial (one record
//! per task) unless stated otherwise.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BenchError, TrialRecord};
use crate::analyzer::TaskType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Test,
}

fn of_type<'a>(records: &'a [&'a TrialRecord], tau: TaskType) -> Vec<&'a TrialRecord> {
    records.iter().copied().filter(|r| r.task_type == tau).collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        n += 1;
        sum += v;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Fraction of tasks of type `tau` whose solution executed.
pub fn pass_at_1(records: &[&TrialRecord], tau: TaskType) -> Result<f64, BenchError> {
    mean(of_type(records, tau).iter().map(|r| if r.executed { 1.0 } else { 0.0 })).ok_or(BenchError::NoTasks(tau))
}

/// `|pred ∩ ref| / |pred|`; an empty prediction scores 0.
pub fn tool_accuracy(pred: &BTreeSet<String>, reference: &BTreeSet<String>) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.intersection(reference).count() as f64 / pred.len() as f64
}

pub fn mean_tool_accuracy(records: &[&TrialRecord], tau: TaskType) -> Result<f64, BenchError> {
    mean(of_type(records, tau).iter().map(|r| {
        let pred: BTreeSet<String> = r.tools_used.iter().cloned().collect();
        let reference: BTreeSet<String> = r.reference_tools.iter().cloned().collect();
        tool_accuracy(&pred, &reference)
    }))
    .ok_or(BenchError::NoTasks(tau))
}

/// Mean evaluator score over assistant tasks; unexecuted tasks score 0.
pub fn output_accuracy(records: &[&TrialRecord]) -> Result<f64, BenchError> {
    mean(of_type(records, TaskType::Assist).iter().map(|r| r.accuracy.unwrap_or(0.0)))
        .ok_or(BenchError::NoTasks(TaskType::Assist))
}

/// Mean instance score of one task on `subset` (0 when not executed).
pub fn task_subset_mean(record: &TrialRecord, subset: Subset) -> f64 {
    let scores = match subset {
        Subset::Train => &record.train_scores,
        Subset::Test => &record.test_scores,
    };
    mean(scores.iter().copied()).unwrap_or(0.0)
}

/// Mean over optimization tasks of the per-task instance mean.
pub fn subset_score(records: &[&TrialRecord], subset: Subset) -> Result<f64, BenchError> {
    mean(of_type(records, TaskType::Opt).iter().map(|r| task_subset_mean(r, subset))).ok_or(BenchError::NoOptTasks)
}

/// `(K − r) / (K − 1)` where `r` is the 1-based rank (best first) and tied
/// scores share their average rank. A single method scores 1.
pub fn normalized_rank(scores: &[f64]) -> Vec<f64> {
    let k = scores.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank average of (i+1)..=(j+1)
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks.iter().map(|r| (k as f64 - r) / (k as f64 - 1.0)).collect()
}

/// Mean over optimization tasks of `method`'s normalized rank among all
/// methods, ranking the per-task subset means.
pub fn rank_score(by_method: &BTreeMap<String, Vec<&TrialRecord>>, method: &str, subset: Subset) -> Result<f64, BenchError> {
    let methods: Vec<&String> = by_method.keys().collect();
    let me = methods
        .iter()
        .position(|m| m.as_str() == method)
        .ok_or_else(|| BenchError::InconsistentTrials(format!("unknown method `{method}`")))?;
    let tasks: Vec<&TrialRecord> = of_type(&by_method[method], TaskType::Opt);
    let mut ranks = Vec::with_capacity(tasks.len());
    for task in tasks {
        let mut scores = Vec::with_capacity(methods.len());
        for m in &methods {
            let rec = by_method[*m]
                .iter()
                .find(|r| r.task_id == task.task_id)
                .ok_or_else(|| BenchError::InconsistentTrials(format!("method `{m}` lacks task `{}`", task.task_id)))?;
            scores.push(task_subset_mean(rec, subset));
        }
        ranks.push(normalized_rank(&scores)[me]);
    }
    mean(ranks).ok_or(BenchError::NoOptTasks)
}

pub fn quality_score(accuracy_a: f64, r_train: f64, r_test: f64) -> f64 {
    0.5 * accuracy_a + 0.25 * r_train + 0.25 * r_test
}

/// Equal-weight mean of the assistant and optimization components.
pub fn overall(assist: f64, opt: f64) -> f64 {
    0.5 * assist + 0.5 * opt
}

/// The full metric suite for one method; `None` when not computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    #[serde(rename = "A_pass_a")]
    pub a_pass_a: Option<T>,
    #[serde(rename = "A_tool_a")]
    pub a_tool_a: Option<T>,
    #[serde(rename = "A_accuracy_a")]
    pub a_accuracy_a: Option<T>,
    #[serde(rename = "A_pass_o")]
    pub a_pass_o: Option<T>,
    #[serde(rename = "A_tool_o")]
    pub a_tool_o: Option<T>,
    #[serde(rename = "S_train")]
    pub s_train: Option<T>,
    #[serde(rename = "S_test")]
    pub s_test: Option<T>,
    #[serde(rename = "R_train")]
    pub r_train: Option<T>,
    #[serde(rename = "R_test")]
    pub r_test: Option<T>,
    #[serde(rename = "S_quality")]
    pub s_quality: Option<T>,
    #[serde(rename = "A_pass")]
    pub a_pass: Option<T>,
    #[serde(rename = "A_tool")]
    pub a_tool: Option<T>,
}

pub const METRIC_NAMES: [&str; 12] = [
    "A_pass_a", "A_tool_a", "A_accuracy_a", "A_pass_o", "A_tool_o", "S_train", "S_test", "R_train", "R_test",
    "S_quality", "A_pass", "A_tool",
];

/// Metric values of one method in one trial.
pub type MethodMetrics = Metrics<f64>;

impl<T: Clone> Metrics<T> {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<T>; 12] {
        [
            self.a_pass_a.clone(),
            self.a_tool_a.clone(),
            self.a_accuracy_a.clone(),
            self.a_pass_o.clone(),
            self.a_tool_o.clone(),
            self.s_train.clone(),
            self.s_test.clone(),
            self.r_train.clone(),
            self.r_test.clone(),
            self.s_quality.clone(),
            self.a_pass.clone(),
            self.a_tool.clone(),
        ]
    }

    pub fn from_values(v: [Option<T>; 12]) -> Self {
        let [a_pass_a, a_tool_a, a_accuracy_a, a_pass_o, a_tool_o, s_train, s_test, r_train, r_test, s_quality, a_pass, a_tool] = v;
        Self {
            a_pass_a,
            a_tool_a,
            a_accuracy_a,
            a_pass_o,
            a_tool_o,
            s_train,
            s_test,
            r_train,
            r_test,
            s_quality,
            a_pass,
            a_tool,
        }
    }
}

/// Computes every metric for `method` from one trial's records of all methods.
pub fn method_metrics(by_method: &BTreeMap<String, Vec<&TrialRecord>>, method: &str) -> Result<MethodMetrics, BenchError> {
    let records = by_method
        .get(method)
        .ok_or_else(|| BenchError::InconsistentTrials(format!("no records for method `{method}`")))?;
    let a_pass_a = pass_at_1(records, TaskType::Assist).ok();
    let a_tool_a = mean_tool_accuracy(records, TaskType::Assist).ok();
    let a_accuracy_a = output_accuracy(records).ok();
    let a_pass_o = pass_at_1(records, TaskType::Opt).ok();
    let a_tool_o = mean_tool_accuracy(records, TaskType::Opt).ok();
    let s_train = subset_score(records, Subset::Train).ok();
    let s_test = subset_score(records, Subset::Test).ok();
    let r_train = match rank_score(by_method, method, Subset::Train) {
        Ok(v) => Some(v),
        Err(BenchError::NoOptTasks) => None,
        Err(e) => return Err(e),
    };
    let r_test = match rank_score(by_method, method, Subset::Test) {
        Ok(v) => Some(v),
        Err(BenchError::NoOptTasks) => None,
        Err(e) => return Err(e),
    };
    let both = |a: Option<f64>, b: Option<f64>| Some(overall(a?, b?));
    Ok(MethodMetrics {
        a_pass_a,
        a_tool_a,
        a_accuracy_a,
        a_pass_o,
        a_tool_o,
        s_train,
        s_test,
        r_train,
        r_test,
        s_quality: (|| Some(quality_score(a_accuracy_a?, r_train?, r_test?)))(),
        a_pass: both(a_pass_a, a_pass_o),
        a_tool: both(a_tool_a, a_tool_o),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(task: &str, tau: TaskType, executed: bool) -> TrialRecord {
        TrialRecord {
            task_id: task.into(),
            method: "m".into(),
            trial: 0,
            task_type: tau,
            executed,
            tools_used: vec![],
            reference_tools: vec![],
            accuracy: None,
            train_scores: vec![],
            test_scores: vec![],
            wall_time: 0.0,
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pass_rates() {
        let rs = [rec("a", TaskType::Assist, true), rec("b", TaskType::Assist, true), rec("c", TaskType::Assist, false)];
        let refs: Vec<&TrialRecord> = rs.iter().collect();
        assert!((pass_at_1(&refs, TaskType::Assist).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(pass_at_1(&refs, TaskType::Opt), Err(BenchError::NoTasks(TaskType::Opt))));
    }

    #[test]
    fn tool_accuracy_examples() {
        assert_eq!(tool_accuracy(&set(&["A"]), &set(&["A"])), 1.0);
        assert!((tool_accuracy(&set(&["A", "B", "C"]), &set(&["A", "B"])) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(tool_accuracy(&set(&["X"]), &set(&["A"])), 0.0);
        assert_eq!(tool_accuracy(&set(&[]), &set(&["A"])), 0.0);
    }

    #[test]
    fn subset_examples() {
        let mut r = rec("t", TaskType::Opt, true);
        r.train_scores = vec![0.5, 0.7];
        assert!((subset_score(&[&r], Subset::Train).unwrap() - 0.6).abs() < 1e-15);
        let mut a = rec("a", TaskType::Opt, true);
        a.test_scores = vec![0.2];
        let mut b = rec("b", TaskType::Opt, true);
        b.test_scores = vec![0.8];
        assert!((subset_score(&[&a, &b], Subset::Test).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(subset_score(&[], Subset::Test), Err(BenchError::NoOptTasks)));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(normalized_rank(&[0.9, 0.1]), vec![1.0, 0.0]);
        assert_eq!(normalized_rank(&[0.9, 0.7, 0.7, 0.1]), vec![1.0, 0.5, 0.5, 0.0]);
        assert_eq!(normalized_rank(&[0.3, 0.3, 0.3]), vec![0.5, 0.5, 0.5]);
        assert_eq!(normalized_rank(&[0.42]), vec![1.0]);
    }

    #[test]
    fn composite_examples() {
        assert_eq!(quality_score(1.0, 1.0, 1.0), 1.0);
        assert!((quality_score(0.8, 0.6, 0.4) - 0.65).abs() < 1e-15);
        assert_eq!(quality_score(0.0, 0.0, 0.0), 0.0);
        assert!((overall(1.0, 0.8) - 0.9).abs() < 1e-15);
        assert_eq!(overall(0.0, 1.0), 0.5);
    }

    proptest! {
        #[test]
        fn rank_invariant_under_monotone_maps(scores in prop::collection::vec(-100.0f64..100.0, 1..12), a in 0.01f64..50.0, b in -10.0f64..10.0) {
            let mapped: Vec<f64> = scores.iter().map(|s| (a * s + b).exp().ln_1p()).collect();
            // strictly monotone maps can merge nearly-equal floats; only compare when order is preserved exactly
            let order_kept = scores.iter().zip(&mapped).all(|(s1, m1)| scores.iter().zip(&mapped)
                .all(|(s2, m2)| s1.total_cmp(s2) == m1.total_cmp(m2)));
            prop_assume!(order_kept);
            prop_assert_eq!(normalized_rank(&scores), normalized_rank(&mapped));
        }

        #[test]
        fn rank_extremes(scores in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let r = normalized_rank(&scores);
            prop_assert!(r.iter().all(|x| (0.0..=1.0).contains(x)));
            let all_tied = scores.iter().all(|s| *s == scores[0]);
            if !all_tied {
                prop_assert!(r.contains(&1.0));
                prop_assert!(r.contains(&0.0));
            }
        }

        #[test]
        fn quality_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..0.5) {
            let base = quality_score(a, b, c);
            prop_assert!(quality_score((a + d).min(1.0), b, c) >= base);
            prop_assert!(quality_score(a, (b + d).min(1.0), c) >= base);
            prop_assert!(quality_score(a, b, (c + d).min(1.0)) >= base);
        }

        #[test]
        fn tool_accuracy_bounds(pred in prop::collection::btree_set("[a-e]", 0..5), reference in prop::collection::btree_set("[a-e]", 0..5)) {
            let acc = tool_accuracy(&pred, &reference);
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert_eq!(acc == 1.0, !pred.is_empty() && pred.is_subset(&reference));
        }
    }
}
