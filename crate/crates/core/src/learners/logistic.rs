//! Multinomial logistic regression trained by mini-batch SGD.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, ProbabilisticModel};
use crate::error::LearnError;
use crate::features::{LabeledDataset, SparseRows};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyper {
    pub l2_penalty: f64,
    /// Step size of the first epoch; epoch `e` uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once an epoch improves the loss by less than this.
    pub tolerance: f64,
    pub batch_size: usize,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper { l2_penalty: 1e-4, learning_rate: 0.1, max_epochs: 200, tolerance: 1e-6, batch_size: 256 }
    }
}

impl LogisticHyper {
    fn validate(&self) -> Result<(), LearnError> {
        let ok = self.l2_penalty >= 0.0
            && self.learning_rate > 0.0
            && self.max_epochs > 0
            && self.tolerance > 0.0
            && self.batch_size > 0;
        if !ok {
            return Err(LearnError::InvalidHyper(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Per-column scale: the standard deviation for columns holding values
/// other than 0 and 1, else 1. Columns are divided by it but not centered,
/// which keeps the rows sparse.
fn column_scales(x: &SparseRows) -> Vec<f64> {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut binary = vec![true; d];
    for i in 0..x.n_rows() {
        let (idx, val) = x.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            let j = j as usize;
            sum[j] += v;
            sum_sq[j] += v * v;
            binary[j] &= v == 1.0;
        }
    }
    (0..d)
        .map(|j| {
            let mean = sum[j] / n;
            let var = (sum_sq[j] / n - mean * mean).max(0.0);
            if binary[j] || var <= 1e-24 {
                1.0
            } else {
                var.sqrt()
            }
        })
        .collect()
}

/// L2-regularized mean cross-entropy of a softmax model over scaled rows.
///
/// Parameters are laid out feature-major: `w[j * k + c]` for feature `j` and
/// class `c`, followed by `k` intercepts. The penalty skips intercepts.
pub struct SoftmaxObjective<'a> {
    x: &'a SparseRows,
    y: &'a [u32],
    k: usize,
    scale: Vec<f64>,
    l2: f64,
}

const CHUNK: usize = 2048;

impl<'a> SoftmaxObjective<'a> {
    pub fn new(data: &'a LabeledDataset, l2: f64) -> SoftmaxObjective<'a> {
        SoftmaxObjective { x: &data.x, y: &data.y, k: data.labels.len(), scale: column_scales(&data.x), l2 }
    }

    pub fn n_params(&self) -> usize {
        (self.x.n_cols() + 1) * self.k
    }

    fn logits(&self, params: &[f64], row: usize, z: &mut [f64]) {
        let k = self.k;
        let d = self.x.n_cols();
        z.copy_from_slice(&params[d * k..]);
        let (idx, val) = self.x.row(row);
        for (&j, &v) in idx.iter().zip(val) {
            let j = j as usize;
            let v = v / self.scale[j];
            for (zc, w) in z.iter_mut().zip(&params[j * k..(j + 1) * k]) {
                *zc += w * v;
            }
        }
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let d = self.x.n_cols();
        0.5 * self.l2 * params[..d * self.k].iter().map(|w| w * w).sum::<f64>()
    }

    /// Adds the row's loss gradient to `grad` and returns its loss.
    fn accumulate(&self, params: &[f64], row: usize, z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        self.logits(params, row, z);
        let loss = softmax_in_place(z, self.y[row] as usize);
        if let Some(grad) = grad {
            let k = self.k;
            let d = self.x.n_cols();
            z[self.y[row] as usize] -= 1.0;
            let (idx, val) = self.x.row(row);
            for (&j, &v) in idx.iter().zip(val) {
                let j = j as usize;
                let v = v / self.scale[j];
                for (g, r) in grad[j * k..(j + 1) * k].iter_mut().zip(z.iter()) {
                    *g += r * v;
                }
            }
            for (g, r) in grad[d * k..].iter_mut().zip(z.iter()) {
                *g += r;
            }
        }
        loss
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.x.n_rows();
        let rows: Vec<usize> = (0..n).collect();
        // fixed-size chunks summed in order: identical result for any thread count
        let parts: Vec<f64> = rows
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut z = vec![0.0; self.k];
                chunk.iter().map(|&i| self.accumulate(params, i, &mut z, None)).sum::<f64>()
            })
            .collect();
        parts.iter().sum::<f64>() / n as f64 + self.penalty(params)
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.x.n_rows();
        let mut grad = vec![0.0; self.n_params()];
        let mut z = vec![0.0; self.k];
        let mut total = 0.0;
        for i in 0..n {
            total += self.accumulate(params, i, &mut z, Some(&mut grad));
        }
        let d = self.x.n_cols();
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n as f64;
            if j < d * self.k {
                *g += self.l2 * params[j];
            }
        }
        (total / n as f64 + self.penalty(params), grad)
    }

    /// One SGD step on the rows of `batch`.
    fn step(&self, params: &mut [f64], batch: &[usize], eta: f64, grad: &mut [f64], z: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &i in batch {
            self.accumulate(params, i, z, Some(grad));
        }
        let d = self.x.n_cols();
        let m = batch.len() as f64;
        for (j, (p, g)) in params.iter_mut().zip(grad.iter()).enumerate() {
            let decay = if j < d * self.k { self.l2 * *p } else { 0.0 };
            *p -= eta * (g / m + decay);
        }
    }
}

/// Turns logits into probabilities in place and returns `-ln p[target]`.
fn softmax_in_place(z: &mut [f64], target: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let loss = sum.ln() - z[target].ln();
    for v in z.iter_mut() {
        *v /= sum;
    }
    loss
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub labels: Vec<String>,
    /// Weights on raw (unscaled) features, feature-major.
    weights: Vec<f64>,
    intercepts: Vec<f64>,
    /// Training loss before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
    pub hyper: LogisticHyper,
}

impl ProbabilisticModel for LogisticModel {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_sparse(&self, indices: &[u32], values: &[f64]) -> Vec<f64> {
        let k = self.labels.len();
        let mut z = self.intercepts.clone();
        for (&j, &v) in indices.iter().zip(values) {
            let j = j as usize;
            for (zc, w) in z.iter_mut().zip(&self.weights[j * k..(j + 1) * k]) {
                *zc += w * v;
            }
        }
        softmax_in_place(&mut z, 0);
        z
    }
}

/// Fits a softmax model by shuffled mini-batch SGD.
///
/// An epoch that would raise the training loss is undone and the step size
/// halved, so `loss_history` never increases.
pub fn train_logistic(data: &LabeledDataset, hyper: &LogisticHyper, seed: u64) -> Result<LogisticModel, LearnError> {
    hyper.validate()?;
    check_training_data(data)?;
    let objective = SoftmaxObjective::new(data, hyper.l2_penalty);
    let k = data.labels.len();
    let d = data.n_features();
    let mut params = vec![0.0; objective.n_params()];
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; k];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::stream(seed, 0);
    let mut lr = hyper.learning_rate;
    let mut history = vec![objective.loss(&params)];

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let before = params.clone();
        let eta = lr / (epoch as f64).sqrt();
        for batch in order.chunks(hyper.batch_size) {
            objective.step(&mut params, batch, eta, &mut grad, &mut z);
        }
        let prev = *history.last().unwrap();
        let loss = objective.loss(&params);
        if !loss.is_finite() || loss > prev {
            params = before;
            lr *= 0.5;
            history.push(prev);
            if lr < hyper.learning_rate * 1e-6 {
                break;
            }
            continue;
        }
        history.push(loss);
        if prev - loss < hyper.tolerance {
            break;
        }
    }

    // fold the column scales into the weights so prediction takes raw features
    let mut weights = params[..d * k].to_vec();
    for j in 0..d {
        for w in &mut weights[j * k..(j + 1) * k] {
            *w /= objective.scale[j];
        }
    }
    Ok(LogisticModel {
        feature_names: data.feature_names.clone(),
        labels: data.labels.clone(),
        weights,
        intercepts: params[d * k..].to_vec(),
        loss_history: history,
        hyper: hyper.clone(),
    })
}
