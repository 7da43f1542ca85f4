//! Histogram gradient-boosted trees with a softmax (or, for two labels,
//! logistic) objective.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, class_counts, ProbabilisticModel};
use crate::error::LearnError;
use crate::features::{LabeledDataset, SparseRows};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtHyper {
    /// Boosting rounds. A multiclass round grows one tree per label.
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub histogram_bins: usize,
    /// Fraction of rows drawn (without replacement) for each round.
    pub subsample: f64,
    /// L2 penalty on leaf values.
    pub l2_leaf: f64,
}

impl Default for GbdtHyper {
    fn default() -> Self {
        GbdtHyper {
            n_trees: 300,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            histogram_bins: 64,
            subsample: 1.0,
            l2_leaf: 1.0,
        }
    }
}

impl GbdtHyper {
    fn validate(&self) -> Result<(), LearnError> {
        let ok = self.max_depth >= 1
            && self.learning_rate > 0.0
            && self.min_samples_leaf >= 1
            && (2..=u16::MAX as usize).contains(&self.histogram_bins)
            && self.subsample > 0.0
            && self.subsample <= 1.0
            && self.l2_leaf >= 0.0;
        if !ok {
            return Err(LearnError::InvalidHyper(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

/// Value of column `j` in a sparse row.
fn lookup(indices: &[u32], values: &[f64], j: u32) -> f64 {
    match indices.binary_search(&j) {
        Ok(p) => values[p],
        Err(_) => 0.0,
    }
}

impl Tree {
    fn predict(&self, indices: &[u32], values: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if lookup(indices, values, *feature) <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= s;
            }
        }
    }
}

/// Per-column bin edges. A value `v` falls in the first bin `b` with
/// `v <= edges[b]`, or in the last bin past every edge.
struct Bins {
    edges: Vec<Vec<f64>>,
    zero_bin: Vec<u16>,
    offsets: Vec<usize>,
    total: usize,
}

impl Bins {
    fn fit(x: &SparseRows, max_bins: usize) -> Bins {
        let n = x.n_rows();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); x.n_cols()];
        for i in 0..n {
            let (idx, val) = x.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                columns[j as usize].push(v);
            }
        }
        let mut edges = Vec::with_capacity(columns.len());
        for mut col in columns {
            let zeros = n - col.len();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut distinct: Vec<(f64, usize)> = Vec::new();
            if zeros > 0 {
                distinct.push((0.0, zeros));
            }
            for v in col {
                match distinct.last_mut() {
                    Some((last, c)) if *last == v => *c += 1,
                    _ => distinct.push((v, 1)),
                }
            }
            distinct.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut e = Vec::new();
            if distinct.len() <= max_bins {
                e.extend(distinct.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)));
            } else {
                let per_bin = n as f64 / max_bins as f64;
                let mut cum = 0usize;
                for (i, w) in distinct.windows(2).enumerate() {
                    cum += distinct[i].1;
                    if cum as f64 >= per_bin * (e.len() + 1) as f64 && e.len() + 1 < max_bins {
                        e.push(0.5 * (w[0].0 + w[1].0));
                    }
                }
            }
            edges.push(e);
        }
        let zero_bin = edges.iter().map(|e| Self::bin_in(e, 0.0)).collect();
        let mut offsets = Vec::with_capacity(edges.len());
        let mut total = 0;
        for e in &edges {
            offsets.push(total);
            total += e.len() + 1;
        }
        Bins { edges, zero_bin, offsets, total }
    }

    fn bin_in(edges: &[f64], v: f64) -> u16 {
        edges.partition_point(|&e| e < v) as u16
    }

    /// Bin of every stored entry of `x`, aligned with its values.
    fn apply(&self, x: &SparseRows) -> Vec<Vec<u16>> {
        (0..x.n_rows())
            .map(|i| {
                let (idx, val) = x.row(i);
                idx.iter().zip(val).map(|(&j, &v)| Self::bin_in(&self.edges[j as usize], v)).collect()
            })
            .collect()
    }
}

struct Hist {
    g: Vec<f64>,
    h: Vec<f64>,
    n: Vec<u32>,
}

impl Hist {
    fn minus(mut self, other: &Hist) -> Hist {
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a -= b;
        }
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            *a -= b;
        }
        for (a, b) in self.n.iter_mut().zip(&other.n) {
            *a -= b;
        }
        self
    }
}

#[derive(Clone, Copy)]
struct Totals {
    g: f64,
    h: f64,
    n: usize,
}

struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
    left: Totals,
}

/// Grows one regression tree on fixed gradients and hessians.
struct Grower<'a> {
    x: &'a SparseRows,
    binned: &'a [Vec<u16>],
    bins: &'a Bins,
    g: &'a [f64],
    h: &'a [f64],
    hyper: &'a GbdtHyper,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    /// Leaf output for every row that took part in growing.
    fitted: Vec<f64>,
}

impl<'a> Grower<'a> {
    fn hist(&self, rows: &[u32]) -> (Hist, Totals) {
        let d = self.x.n_cols();
        let mut hist = Hist { g: vec![0.0; self.bins.total], h: vec![0.0; self.bins.total], n: vec![0; self.bins.total] };
        let mut nz_g = vec![0.0; d];
        let mut nz_h = vec![0.0; d];
        let mut nz_n = vec![0u32; d];
        let mut t = Totals { g: 0.0, h: 0.0, n: rows.len() };
        for &r in rows {
            let r = r as usize;
            let (gi, hi) = (self.g[r], self.h[r]);
            t.g += gi;
            t.h += hi;
            let (idx, _) = self.x.row(r);
            for (&j, &b) in idx.iter().zip(&self.binned[r]) {
                let j = j as usize;
                let at = self.bins.offsets[j] + b as usize;
                hist.g[at] += gi;
                hist.h[at] += hi;
                hist.n[at] += 1;
                nz_g[j] += gi;
                nz_h[j] += hi;
                nz_n[j] += 1;
            }
        }
        // rows without a stored entry hold 0 in that column
        for j in 0..d {
            let at = self.bins.offsets[j] + self.bins.zero_bin[j] as usize;
            hist.g[at] += t.g - nz_g[j];
            hist.h[at] += t.h - nz_h[j];
            hist.n[at] += rows.len() as u32 - nz_n[j];
        }
        (hist, t)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.hyper.l2_leaf)
    }

    fn best_split(&self, hist: &Hist, t: Totals) -> Option<Split> {
        let min_leaf = self.hyper.min_samples_leaf;
        let parent = self.score(t.g, t.h);
        let mut best: Option<Split> = None;
        for (j, edges) in self.bins.edges.iter().enumerate() {
            let off = self.bins.offsets[j];
            let mut left = Totals { g: 0.0, h: 0.0, n: 0 };
            for b in 0..edges.len() {
                left.g += hist.g[off + b];
                left.h += hist.h[off + b];
                left.n += hist.n[off + b] as usize;
                if left.n < min_leaf {
                    continue;
                }
                if t.n - left.n < min_leaf {
                    break;
                }
                let gain = self.score(left.g, left.h) + self.score(t.g - left.g, t.h - left.h) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: j, bin: b, gain, left });
                }
            }
        }
        best
    }

    fn leaf(&mut self, rows: &[u32], t: Totals) -> u32 {
        let value = -t.g / (t.h + self.hyper.l2_leaf) * self.hyper.learning_rate;
        for &r in rows {
            self.fitted[r as usize] = value;
        }
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() as u32 - 1
    }

    fn grow(&mut self, rows: Vec<u32>, hist: Hist, t: Totals, depth: usize) -> u32 {
        if depth >= self.hyper.max_depth || t.n < 2 * self.hyper.min_samples_leaf {
            return self.leaf(&rows, t);
        }
        let Some(split) = self.best_split(&hist, t) else {
            return self.leaf(&rows, t);
        };
        let threshold = self.bins.edges[split.feature][split.bin];
        let feature = split.feature as u32;
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| {
            let (idx, val) = self.x.row(r as usize);
            lookup(idx, val, feature) <= threshold
        });
        drop(rows);
        self.importance[split.feature] += split.gain;
        let right_t = Totals { g: t.g - split.left.g, h: t.h - split.left.h, n: t.n - split.left.n };
        // histogram only the smaller child; the other is parent minus it
        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let (small, _) = self.hist(&left_rows);
            let large = hist.minus(&small);
            (small, large)
        } else {
            let (small, _) = self.hist(&right_rows);
            let large = hist.minus(&small);
            (large, small)
        };
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.grow(left_rows, left_hist, split.left, depth + 1);
        let right = self.grow(right_rows, right_hist, right_t, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub feature_names: Vec<String>,
    pub labels: Vec<String>,
    /// Initial raw scores: log class priors, or the log-odds of the second
    /// label for two-label problems.
    base_score: Vec<f64>,
    /// `trees[round][output]`.
    trees: Vec<Vec<Tree>>,
    /// Total split gain per feature, normalized to sum to 1.
    importances: Vec<f64>,
    /// Training log-loss before boosting and after each round.
    pub loss_history: Vec<f64>,
    pub hyper: GbdtHyper,
}

impl GbdtModel {
    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    fn raw_scores(&self, indices: &[u32], values: &[f64], rounds: usize) -> Vec<f64> {
        let mut s = self.base_score.clone();
        for round in &self.trees[..rounds.min(self.trees.len())] {
            for (sc, tree) in s.iter_mut().zip(round) {
                *sc += tree.predict(indices, values);
            }
        }
        s
    }

    /// Prediction using only the first `rounds` boosting rounds.
    pub fn predict_staged(&self, indices: &[u32], values: &[f64], rounds: usize) -> Vec<f64> {
        to_probs(&self.raw_scores(indices, values, rounds), self.labels.len())
    }

    /// The model made of the first `rounds` rounds.
    pub fn truncated(&self, rounds: usize) -> GbdtModel {
        let mut m = self.clone();
        m.trees.truncate(rounds);
        m.loss_history.truncate(rounds + 1);
        m
    }
}

fn to_probs(scores: &[f64], k: usize) -> Vec<f64> {
    if k == 2 && scores.len() == 1 {
        let p = 1.0 / (1.0 + (-scores[0]).exp());
        return vec![1.0 - p, p];
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

impl ProbabilisticModel for GbdtModel {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_sparse(&self, indices: &[u32], values: &[f64]) -> Vec<f64> {
        self.predict_staged(indices, values, self.trees.len())
    }

    fn feature_importances(&self) -> Result<Vec<(String, f64)>, LearnError> {
        Ok(self.feature_names.iter().cloned().zip(self.importances.iter().copied()).collect())
    }
}

fn mean_log_loss(scores: &[f64], y: &[u32], m: usize, k: usize) -> f64 {
    let parts: Vec<f64> = scores
        .par_chunks(m * 2048)
        .zip(y.par_chunks(2048))
        .map(|(s, y)| {
            s.chunks(m).zip(y).map(|(row, &t)| -to_probs(row, k)[t as usize].max(1e-300).ln()).sum::<f64>()
        })
        .collect();
    parts.iter().sum::<f64>() / y.len() as f64
}

/// Fits a boosted ensemble.
///
/// Every round's trees are shrunk further if needed so that the training
/// log-loss never increases from one round to the next.
pub fn train_gbdt(data: &LabeledDataset, hyper: &GbdtHyper, seed: u64) -> Result<GbdtModel, LearnError> {
    hyper.validate()?;
    check_training_data(data)?;
    let n = data.len();
    let k = data.labels.len();
    let m = if k == 2 { 1 } else { k };
    let counts = class_counts(data);
    let base_score: Vec<f64> = if m == 1 {
        vec![(counts[1] as f64 / counts[0] as f64).ln()]
    } else {
        counts.iter().map(|&c| (c as f64).max(1e-12).ln() - (n as f64).ln()).collect()
    };

    let bins = Bins::fit(&data.x, hyper.histogram_bins);
    let binned = bins.apply(&data.x);
    let mut scores: Vec<f64> = (0..n).flat_map(|_| base_score.iter().copied()).collect();
    let mut history = vec![mean_log_loss(&scores, &data.y, m, k)];
    let mut importance = vec![0.0; data.n_features()];
    let mut trees = Vec::with_capacity(hyper.n_trees);
    let mut rng = rng::stream(seed, 0);

    for _ in 0..hyper.n_trees {
        let rows: Vec<u32> = if hyper.subsample < 1.0 {
            (0..n as u32).filter(|_| rng.random::<f64>() < hyper.subsample).collect()
        } else {
            (0..n as u32).collect()
        };
        let in_sample = {
            let mut mask = vec![false; n];
            rows.iter().for_each(|&r| mask[r as usize] = true);
            mask
        };

        // gradients and hessians of the loss w.r.t. each output's raw score
        let mut grads = vec![vec![0.0; n]; m];
        let mut hess = vec![vec![0.0; n]; m];
        for i in 0..n {
            let p = to_probs(&scores[i * m..(i + 1) * m], k);
            let y = data.y[i] as usize;
            for c in 0..m {
                let (pc, target) = if m == 1 { (p[1], y == 1) } else { (p[c], y == c) };
                grads[c][i] = pc - f64::from(u8::from(target));
                hess[c][i] = (pc * (1.0 - pc)).max(1e-16);
            }
        }

        let grown: Vec<(Tree, Vec<f64>, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|c| {
                let mut grower = Grower {
                    x: &data.x,
                    binned: &binned,
                    bins: &bins,
                    g: &grads[c],
                    h: &hess[c],
                    hyper,
                    nodes: Vec::new(),
                    importance: vec![0.0; data.n_features()],
                    fitted: vec![0.0; n],
                };
                let (hist, totals) = grower.hist(&rows);
                grower.grow(rows.clone(), hist, totals, 0);
                let tree = Tree { nodes: grower.nodes };
                let mut fitted = grower.fitted;
                for (i, f) in fitted.iter_mut().enumerate() {
                    if !in_sample[i] {
                        let (idx, val) = data.x.row(i);
                        *f = tree.predict(idx, val);
                    }
                }
                (tree, grower.importance, fitted)
            })
            .collect();

        let prev = *history.last().unwrap();
        let mut shrink = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate: Vec<f64> = scores
                .iter()
                .enumerate()
                .map(|(at, s)| s + shrink * grown[at % m].2[at / m])
                .collect();
            let loss = mean_log_loss(&candidate, &data.y, m, k);
            if loss <= prev {
                accepted = Some((candidate, loss));
                break;
            }
            shrink *= 0.5;
        }
        let mut round = Vec::with_capacity(m);
        match accepted {
            Some((candidate, loss)) => {
                scores = candidate;
                history.push(loss);
                for (mut tree, imp, _) in grown {
                    tree.scale(shrink);
                    importance.iter_mut().zip(imp).for_each(|(a, b)| *a += b);
                    round.push(tree);
                }
            }
            None => {
                history.push(prev);
                for (mut tree, _, _) in grown {
                    tree.scale(0.0);
                    round.push(tree);
                }
            }
        }
        trees.push(round);
    }

    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    Ok(GbdtModel {
        feature_names: data.feature_names.clone(),
        labels: data.labels.clone(),
        base_score,
        trees,
        importances: importance,
        loss_history: history,
        hyper: hyper.clone(),
    })
}
