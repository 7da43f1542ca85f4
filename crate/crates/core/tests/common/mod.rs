//! Brute-force metric oracles shared by the integration tests.

use rand::Rng;

/// Random fixture with coarse probabilities so ties are common.
pub fn fixture(seed: u64, n: usize, n_labels: usize) -> (Vec<u32>, Vec<Vec<f64>>) {
    let mut r = ipa_ppm::rng::stream(seed, 77);
    let y = (0..n).map(|_| r.random_range(0..n_labels as u32)).collect();
    let probs = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n_labels).map(|_| f64::from(r.random_range(0..5u8))).collect();
            let total: f64 = raw.iter().sum::<f64>().max(1.0);
            raw.iter().map(|v| v / total).collect()
        })
        .collect();
    (y, probs)
}

/// The true label is in the top k when fewer than k labels outrank it.
fn in_topk(labels: &[String], p: &[f64], t: usize, k: usize) -> bool {
    let better = (0..labels.len()).filter(|&c| p[c] > p[t] || (p[c] == p[t] && labels[c] < labels[t])).count();
    better < k
}

pub fn oracle_topk(labels: &[String], y: &[u32], probs: &[Vec<f64>], k: usize, weighted: bool) -> f64 {
    let n = labels.len();
    let mut support = vec![0usize; n];
    let mut hits = vec![0usize; n];
    for (&t, p) in y.iter().zip(probs) {
        support[t as usize] += 1;
        if in_topk(labels, p, t as usize, k) {
            hits[t as usize] += 1;
        }
    }
    let recall = |c: usize| hits[c] as f64 / support[c] as f64;
    if weighted {
        let total: usize = support.iter().sum();
        (0..n).filter(|&c| support[c] > 0).map(|c| recall(c) * support[c] as f64).sum::<f64>() / total as f64
    } else {
        let kept: Vec<usize> = (0..n).filter(|&c| support[c] > 0 && labels[c] != "end").collect();
        kept.iter().map(|&c| recall(c)).sum::<f64>() / kept.len() as f64
    }
}

pub fn oracle_f1(labels: &[String], y: &[u32], pred: &[u32], weighted: bool) -> f64 {
    let n = labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (&t, &p) in y.iter().zip(pred) {
        confusion[t as usize][p as usize] += 1;
    }
    let f1 = |c: usize| {
        let tp = confusion[c][c];
        let fn_: usize = (0..n).filter(|&j| j != c).map(|j| confusion[c][j]).sum();
        let fp: usize = (0..n).filter(|&i| i != c).map(|i| confusion[i][c]).sum();
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let support = |c: usize| confusion[c].iter().sum::<usize>();
    let predicted = |c: usize| (0..n).map(|i| confusion[i][c]).sum::<usize>();
    if weighted {
        let total = y.len();
        (0..n).map(|c| f1(c) * support(c) as f64).sum::<f64>() / total as f64
    } else {
        let kept: Vec<usize> =
            (0..n).filter(|&c| support(c) + predicted(c) > 0 && labels[c] != "end").collect();
        kept.iter().map(|&c| f1(c)).sum::<f64>() / kept.len() as f64
    }
}
