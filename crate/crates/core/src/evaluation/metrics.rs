//! Goodness-of-fit metrics for ranked and point predictions.

use serde::Serialize;

use crate::error::EvalError;
use crate::learners::topk_indices;

/// How per-label values are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Weighted by each label's number of true samples.
    Weighted,
    /// Unweighted mean over the labels that occur, leaving out `end`.
    Average,
}

/// Label left out of unweighted averages.
pub const EXCLUDED_FROM_AVERAGE: &str = "end";

fn check_len(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch(a, b));
    }
    Ok(())
}

fn combine(per_label: &[f64], support: &[usize], include: &[bool], labels: &[String], avg: Averaging) -> f64 {
    match avg {
        Averaging::Weighted => {
            let total: usize = support.iter().sum();
            if total == 0 {
                return 0.0;
            }
            per_label.iter().zip(support).map(|(v, &s)| v * s as f64).sum::<f64>() / total as f64
        }
        Averaging::Average => {
            let kept: Vec<f64> = (0..labels.len())
                .filter(|&c| include[c] && labels[c] != EXCLUDED_FROM_AVERAGE)
                .map(|c| per_label[c])
                .collect();
            if kept.is_empty() {
                0.0
            } else {
                kept.iter().sum::<f64>() / kept.len() as f64
            }
        }
    }
}

/// Per-label recall of the top-`k` sets, combined as `avg` prescribes.
///
/// Labels without true samples are left out of the unweighted mean.
pub fn topk_recall(
    y: &[u32],
    probs: &[Vec<f64>],
    labels: &[String],
    k: usize,
    avg: Averaging,
) -> Result<f64, EvalError> {
    check_len(y.len(), probs.len())?;
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let mut support = vec![0usize; labels.len()];
    let mut hits = vec![0usize; labels.len()];
    for (&t, p) in y.iter().zip(probs) {
        support[t as usize] += 1;
        if topk_indices(labels, p, k)?.contains(&(t as usize)) {
            hits[t as usize] += 1;
        }
    }
    let recall: Vec<f64> =
        hits.iter().zip(&support).map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 }).collect();
    let present: Vec<bool> = support.iter().map(|&s| s > 0).collect();
    Ok(combine(&recall, &support, &present, labels, avg))
}

/// Share of samples whose true label is among the top `k`.
pub fn topk_hit_rate(y: &[u32], probs: &[Vec<f64>], labels: &[String], k: usize) -> Result<f64, EvalError> {
    check_len(y.len(), probs.len())?;
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (&t, p) in y.iter().zip(probs) {
        if topk_indices(labels, p, k)?.contains(&(t as usize)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / y.len() as f64)
}

pub fn accuracy(y: &[u32], pred: &[u32]) -> Result<f64, EvalError> {
    check_len(y.len(), pred.len())?;
    if y.is_empty() {
        return Ok(0.0);
    }
    Ok(y.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

/// Per-label F1 (0 when precision and recall are both undefined or zero),
/// combined as `avg` prescribes. The unweighted mean covers labels that are
/// true or predicted at least once.
pub fn f1_score(y: &[u32], pred: &[u32], labels: &[String], avg: Averaging) -> Result<f64, EvalError> {
    check_len(y.len(), pred.len())?;
    let n = labels.len();
    let mut tp = vec![0usize; n];
    let mut support = vec![0usize; n];
    let mut predicted = vec![0usize; n];
    for (&t, &p) in y.iter().zip(pred) {
        support[t as usize] += 1;
        predicted[p as usize] += 1;
        if t == p {
            tp[t as usize] += 1;
        }
    }
    let f1: Vec<f64> = (0..n)
        .map(|c| {
            let denom = support[c] + predicted[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect();
    let present: Vec<bool> = (0..n).map(|c| support[c] + predicted[c] > 0).collect();
    Ok(combine(&f1, &support, &present, labels, avg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Precision, recall and F1 of the `positive` label, plus accuracy.
pub fn binary_metrics(y: &[u32], pred: &[u32], positive: u32) -> Result<BinaryMetrics, EvalError> {
    check_len(y.len(), pred.len())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&t, &p) in y.iter().zip(pred) {
        match (t == positive, p == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(BinaryMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        f1: ratio(2 * tp, 2 * tp + fp + fneg),
        accuracy: accuracy(y, pred)?,
    })
}

/// Most probable label per row, ties to the smallest label.
pub fn argmax_labels(probs: &[Vec<f64>], labels: &[String]) -> Vec<u32> {
    probs.iter().map(|p| topk_indices(labels, p, 1).expect("k = 1 is valid")[0] as u32).collect()
}
