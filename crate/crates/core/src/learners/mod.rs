//! Probabilistic classifiers over sparse feature rows: softmax regression
//! and gradient-boosted trees, with a shared versioned JSON model format.

mod gbdt;
mod logistic;

pub use gbdt::{train_gbdt, GbdtHyper, GbdtModel};
pub use logistic::{train_logistic, LogisticHyper, LogisticModel, SoftmaxObjective};

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::LearnError;
use crate::features::{LabeledDataset, SparseRows};

/// Maps a feature row to a probability distribution over a fixed label list.
pub trait ProbabilisticModel: Send + Sync {
    fn labels(&self) -> &[String];
    fn feature_names(&self) -> &[String];

    /// Distribution for one sparse row (column indices ascending).
    fn predict_sparse(&self, indices: &[u32], values: &[f64]) -> Vec<f64>;

    fn predict_distribution(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        check_width(self.feature_names().len(), x.len())?;
        let (indices, values) = sparsify(x);
        Ok(self.predict_sparse(&indices, &values))
    }

    /// Distributions for every row of `x`, in row order.
    fn predict_rows(&self, x: &SparseRows) -> Result<Vec<Vec<f64>>, LearnError> {
        check_width(self.feature_names().len(), x.n_cols())?;
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let (idx, val) = x.row(i);
                self.predict_sparse(idx, val)
            })
            .collect())
    }

    /// Normalized importance per feature, in feature order.
    fn feature_importances(&self) -> Result<Vec<(String, f64)>, LearnError> {
        Err(LearnError::NoImportances)
    }
}

fn check_width(expected: usize, found: usize) -> Result<(), LearnError> {
    if expected != found {
        return Err(LearnError::FeatureCount { expected, found });
    }
    Ok(())
}

fn sparsify(x: &[f64]) -> (Vec<u32>, Vec<f64>) {
    x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j as u32, v)).unzip()
}

/// The `k` most probable labels, most probable first; equal probabilities
/// are ordered by label.
pub fn topk(labels: &[String], probs: &[f64], k: usize) -> Result<Vec<(String, f64)>, LearnError> {
    Ok(topk_indices(labels, probs, k)?.into_iter().map(|i| (labels[i].clone(), probs[i])).collect())
}

/// Like [`topk`], returning label indices.
pub fn topk_indices(labels: &[String], probs: &[f64], k: usize) -> Result<Vec<usize>, LearnError> {
    if k == 0 {
        return Err(LearnError::InvalidK);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b].partial_cmp(&probs[a]).unwrap_or(Ordering::Equal).then_with(|| labels[a].cmp(&labels[b]))
    });
    order.truncate(k);
    Ok(order)
}

pub fn predict_topk(
    model: &dyn ProbabilisticModel,
    x: &[f64],
    k: usize,
) -> Result<Vec<(String, f64)>, LearnError> {
    if k == 0 {
        return Err(LearnError::InvalidK);
    }
    topk(model.labels(), &model.predict_distribution(x)?, k)
}

/// Checks what every trainer needs: finite values and at least two labels.
fn check_training_data(data: &LabeledDataset) -> Result<(), LearnError> {
    for i in 0..data.len() {
        let (idx, val) = data.x.row(i);
        if let Some(p) = val.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite { row: i, feature: data.feature_names[idx[p] as usize].clone() });
        }
    }
    let mut seen = vec![false; data.labels.len()];
    for &y in &data.y {
        seen[y as usize] = true;
    }
    let distinct = seen.iter().filter(|s| **s).count();
    if distinct < 2 {
        return Err(LearnError::SingleLabel(distinct));
    }
    Ok(())
}

fn class_counts(data: &LabeledDataset) -> Vec<usize> {
    let mut counts = vec![0; data.labels.len()];
    for &y in &data.y {
        counts[y as usize] += 1;
    }
    counts
}

/// Cross-entropy of `probs` against integer labels, averaged over rows.
pub fn log_loss(probs: &[Vec<f64>], y: &[u32]) -> f64 {
    let total: f64 = probs.iter().zip(y).map(|(p, &t)| -p[t as usize].max(1e-300).ln()).sum();
    total / y.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Logit,
    Gbdt,
}

impl Learner {
    pub const ALL: [Learner; 2] = [Learner::Logit, Learner::Gbdt];

    pub fn name(self) -> &'static str {
        match self {
            Learner::Logit => "logit",
            Learner::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Learner {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" | "logistic" => Ok(Learner::Logit),
            "gbdt" | "boosting" => Ok(Learner::Gbdt),
            other => Err(LearnError::InvalidHyper(format!("unknown learner `{other}`"))),
        }
    }
}

/// Hyperparameters for either learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    #[serde(default)]
    pub logit: LogisticHyper,
    #[serde(default)]
    pub gbdt: GbdtHyper,
}

impl Hyper {
    /// Lighter settings for the full benchmark matrix on a single core: logit steps
    /// of 1.0 and 40 trees of depth 5. Everything else keeps its default.
    pub fn desk() -> Hyper {
        Hyper {
            logit: LogisticHyper { learning_rate: 1.0, ..Default::default() },
            gbdt: GbdtHyper { n_trees: 40, max_depth: 5, ..Default::default() },
        }
    }

    /// Parses a JSON document; missing sections and fields take defaults.
    pub fn from_json(text: &str) -> Result<Hyper, LearnError> {
        serde_json::from_str(text).map_err(|e| LearnError::InvalidHyper(e.to_string()))
    }
}

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Model {
    Logit(LogisticModel),
    Gbdt(GbdtModel),
}

pub const MODEL_FORMAT: &str = "ipa-ppm-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    pub fn learner(&self) -> Learner {
        match self {
            Model::Logit(_) => Learner::Logit,
            Model::Gbdt(_) => Learner::Gbdt,
        }
    }

    fn inner(&self) -> &dyn ProbabilisticModel {
        match self {
            Model::Logit(m) => m,
            Model::Gbdt(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self.clone() };
        serde_json::to_string(&file).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Model, LearnError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(LearnError::Format(format!("not a model file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(LearnError::Format(format!("unsupported model version {}", file.version)));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json()).map_err(|e| LearnError::Format(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Model, LearnError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LearnError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl ProbabilisticModel for Model {
    fn labels(&self) -> &[String] {
        self.inner().labels()
    }

    fn feature_names(&self) -> &[String] {
        self.inner().feature_names()
    }

    fn predict_sparse(&self, indices: &[u32], values: &[f64]) -> Vec<f64> {
        self.inner().predict_sparse(indices, values)
    }

    fn feature_importances(&self) -> Result<Vec<(String, f64)>, LearnError> {
        self.inner().feature_importances()
    }
}

/// Trains the chosen learner.
pub fn train(data: &LabeledDataset, learner: Learner, hyper: &Hyper, seed: u64) -> Result<Model, LearnError> {
    Ok(match learner {
        Learner::Logit => Model::Logit(train_logistic(data, &hyper.logit, seed)?),
        Learner::Gbdt => Model::Gbdt(train_gbdt(data, &hyper.gbdt, seed)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn topk_orders_by_probability_then_label() {
        let l = labels(&["c", "a", "b"]);
        let top: Vec<String> = topk(&l, &[0.5, 0.3, 0.2], 2).unwrap().into_iter().map(|x| x.0).collect();
        assert_eq!(top, ["c", "a"]);
        let uniform = labels(&["d", "b", "a", "c"]);
        let top: Vec<String> = topk(&uniform, &[0.25; 4], 3).unwrap().into_iter().map(|x| x.0).collect();
        assert_eq!(top, ["a", "b", "c"]);
        assert!(matches!(topk(&l, &[0.5, 0.3, 0.2], 0), Err(LearnError::InvalidK)));
        assert_eq!(topk(&l, &[0.5, 0.3, 0.2], 3).unwrap().len(), 3);
    }
}
