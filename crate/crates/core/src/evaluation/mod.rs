//! Grouped cross-validation, the metric suite and benchmark tables.

mod metrics;

pub use metrics::{
    accuracy, argmax_labels, binary_metrics, f1_score, topk_hit_rate, topk_recall, Averaging, BinaryMetrics,
    EXCLUDED_FROM_AVERAGE,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::domain::BusinessCalendar;
use crate::error::EvalError;
use crate::features::{FeatureRegime, Featurizer, LabeledDataset, Task, LATE};
use crate::learners::{train, Hyper, Learner, ProbabilisticModel};
use crate::log_io::EventLog;
use crate::rng;

/// Splits the distinct `groups` into `k` disjoint test folds.
///
/// Groups are shuffled with the seed and dealt round-robin, so fold sizes
/// differ by at most one group. Each fold lists its groups in ascending order.
pub fn grouped_kfold(groups: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<u32>>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let distinct: BTreeSet<u32> = groups.iter().copied().collect();
    if distinct.len() < k {
        return Err(EvalError::TooFewGroups { k, found: distinct.len() });
    }
    let mut order: Vec<u32> = distinct.into_iter().collect();
    order.shuffle(&mut rng::stream(seed, 0));
    let mut folds = vec![Vec::new(); k];
    for (i, g) in order.into_iter().enumerate() {
        folds[i % k].push(g);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

fn digest_groups<'a>(groups: impl IntoIterator<Item = &'a u32>) -> String {
    let set: BTreeSet<u32> = groups.into_iter().copied().collect();
    let mut h = Sha256::new();
    for g in set {
        h.update(g.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Digest of a whole fold assignment.
pub fn fold_digest(folds: &[Vec<u32>]) -> String {
    let mut h = Sha256::new();
    for (i, f) in folds.iter().enumerate() {
        h.update((i as u64).to_le_bytes());
        h.update(digest_groups(f).as_bytes());
    }
    hex::encode(h.finalize())
}

/// Confirms the training rows of `fold` cover exactly the groups outside it.
///
/// A held-out row copied into the training set changes the digest of the
/// training groups and is reported as leakage.
pub fn check_fold(folds: &[Vec<u32>], fold: usize, train_groups: &[u32]) -> Result<(), EvalError> {
    let outside = folds.iter().enumerate().filter(|(i, _)| *i != fold).flat_map(|(_, f)| f.iter());
    let expected = digest_groups(outside);
    let found = digest_groups(train_groups);
    if expected != found {
        return Err(EvalError::FoldLeakage { fold, expected, found });
    }
    Ok(())
}

/// Metric names reported for a task, in table order.
pub fn metric_names(task: Task) -> &'static [&'static str] {
    match task {
        Task::NextActivity => {
            &["weighted_top3_recall", "average_top3_recall", "weighted_f1", "average_f1", "accuracy"]
        }
        Task::Lateness => &["precision", "recall", "f1", "accuracy"],
    }
}

/// Metrics of one fold's held-out predictions.
pub fn score_predictions(
    task: Task,
    y: &[u32],
    probs: &[Vec<f64>],
    labels: &[String],
) -> Result<BTreeMap<String, f64>, EvalError> {
    let pred = argmax_labels(probs, labels);
    let mut m = BTreeMap::new();
    match task {
        Task::NextActivity => {
            m.insert("weighted_top3_recall".into(), topk_recall(y, probs, labels, 3, Averaging::Weighted)?);
            m.insert("average_top3_recall".into(), topk_recall(y, probs, labels, 3, Averaging::Average)?);
            m.insert("weighted_f1".into(), f1_score(y, &pred, labels, Averaging::Weighted)?);
            m.insert("average_f1".into(), f1_score(y, &pred, labels, Averaging::Average)?);
            m.insert("accuracy".into(), accuracy(y, &pred)?);
        }
        Task::Lateness => {
            let late = labels.iter().position(|l| l == LATE).unwrap_or(0) as u32;
            let b = binary_metrics(y, &pred, late)?;
            m.insert("precision".into(), b.precision);
            m.insert("recall".into(), b.recall);
            m.insert("f1".into(), b.f1);
            m.insert("accuracy".into(), b.accuracy);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub learner: Learner,
    pub regime: FeatureRegime,
    pub task: Task,
    pub k: usize,
    pub seed: u64,
    pub n_rows: usize,
    pub folds: Vec<BTreeMap<String, f64>>,
    /// Arithmetic mean of each metric over the folds.
    pub mean: BTreeMap<String, f64>,
    pub fold_digest: String,
}

impl MetricsReport {
    pub fn metric(&self, name: &str) -> f64 {
        self.mean[name]
    }

    /// Row label in the benchmark tables, e.g. `Logistic regression, pa, conv`.
    pub fn method(&self) -> String {
        let learner = match self.learner {
            Learner::Logit => "Logistic regression",
            Learner::Gbdt => "Gradient-boosted trees",
        };
        let regime = match self.regime.name() {
            "npa-conv" => "npa, conv",
            "pa-conv" => "pa, conv",
            "pa-user" => "pa, user",
            _ => "pa, conv+user",
        };
        format!("{learner}, {regime}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub k: usize,
    pub seed: u64,
    pub hyper: Hyper,
    pub calendar: BusinessCalendar,
    /// Keep only lateness anchors at or before the regular deadline.
    pub pre_deadline_only: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            k: 5,
            seed: 0,
            hyper: Hyper::default(),
            calendar: BusinessCalendar::default(),
            pre_deadline_only: false,
        }
    }
}

/// Builds the dataset of `task` under `regime`.
pub fn build_dataset(
    log: &EventLog,
    task: Task,
    regime: FeatureRegime,
    config: &BenchmarkConfig,
) -> Result<LabeledDataset, EvalError> {
    let f = Featurizer::new(regime, task).with_calendar(config.calendar.clone());
    Ok(match task {
        Task::NextActivity => f.next_activity_dataset(log)?,
        Task::Lateness => f.lateness_dataset(log, config.calendar.regular_deadline, config.pre_deadline_only)?,
    })
}

/// Cross-validates one learner on a prepared dataset.
pub fn cross_validate(
    data: &LabeledDataset,
    learner: Learner,
    config: &BenchmarkConfig,
) -> Result<MetricsReport, EvalError> {
    let folds = grouped_kfold(&data.groups, config.k, config.seed)?;
    let task = data.task();
    let mut fold_of = BTreeMap::new();
    for (f, groups) in folds.iter().enumerate() {
        for &g in groups {
            fold_of.insert(g, f);
        }
    }
    let mut per_fold = Vec::with_capacity(folds.len());
    for f in 0..folds.len() {
        let (test, train_rows): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| fold_of[&data.groups[i]] == f);
        let train_set = data.subset(&train_rows);
        check_fold(&folds, f, &train_set.groups)?;
        let test_set = data.subset(&test);
        let model = train(&train_set, learner, &config.hyper, config.seed.wrapping_add(f as u64))?;
        let probs = model.predict_rows(&test_set.x)?;
        per_fold.push(score_predictions(task, &test_set.y, &probs, &test_set.labels)?);
    }
    let mean = metric_names(task)
        .iter()
        .map(|&name| {
            let avg = per_fold.iter().map(|m| m[name]).sum::<f64>() / per_fold.len() as f64;
            (name.to_string(), avg)
        })
        .collect();
    Ok(MetricsReport {
        learner,
        regime: data.regime(),
        task,
        k: config.k,
        seed: config.seed,
        n_rows: data.len(),
        folds: per_fold,
        mean,
        fold_digest: fold_digest(&folds),
    })
}

/// Featurizes the log and cross-validates one learner/regime configuration.
pub fn run_benchmark(
    log: &EventLog,
    task: Task,
    learner: Learner,
    regime: FeatureRegime,
    config: &BenchmarkConfig,
) -> Result<MetricsReport, EvalError> {
    cross_validate(&build_dataset(log, task, regime, config)?, learner, config)
}

/// Every learner under every regime, in table order (learner-major).
pub fn run_matrix(log: &EventLog, task: Task, config: &BenchmarkConfig) -> Result<Vec<MetricsReport>, EvalError> {
    let mut by_regime = Vec::new();
    for regime in FeatureRegime::ALL {
        let data = build_dataset(log, task, regime, config)?;
        let reports = Learner::ALL
            .iter()
            .map(|&l| cross_validate(&data, l, config))
            .collect::<Result<Vec<_>, _>>()?;
        by_regime.push(reports);
    }
    Ok(Learner::ALL.iter().enumerate().flat_map(|(li, _)| by_regime.iter().map(move |r| r[li].clone())).collect())
}

fn heading(name: &str) -> &'static str {
    match name {
        "weighted_top3_recall" => "Weighted Top-3 recall",
        "average_top3_recall" => "Average Top-3 recall",
        "weighted_f1" => "Weighted F1",
        "average_f1" => "Average F1",
        "accuracy" => "Accuracy",
        "precision" => "Precision",
        "recall" => "Recall",
        "f1" => "F1",
        _ => "?",
    }
}

/// Markdown table with one row per configuration and fold-mean metrics.
/// All reports must belong to the same task as the first.
pub fn matrix_markdown(reports: &[MetricsReport]) -> String {
    let Some(first) = reports.first() else { return String::new() };
    let names = metric_names(first.task);
    let mut out = String::from("| Prediction method |");
    for n in names {
        write!(out, " {} |", heading(n)).unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(names.len()));
    out.push('\n');
    for r in reports {
        write!(out, "| {} |", r.method()).unwrap();
        for n in names {
            write!(out, " {:.3} |", r.metric(n)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn matrix_json(reports: &[MetricsReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Features ranked by importance, highest first; ties keep feature order.
pub fn importance_report(
    model: &dyn ProbabilisticModel,
    top_n: usize,
) -> Result<Vec<(String, f64)>, EvalError> {
    let mut ranked = model.feature_importances()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked.truncate(top_n);
    Ok(ranked)
}
