use ipa_ppm::features::{LabeledDataset, SparseRows};
use ipa_ppm::learners::*;
use ipa_ppm::LearnError;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn dataset(rows: &[Vec<f64>], y: &[u32], labels: &[&str]) -> LabeledDataset {
    let d = rows[0].len();
    LabeledDataset {
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
        labels: labels.iter().map(|s| s.to_string()).collect(),
        x: SparseRows::from_dense(d, rows.iter().map(Vec::as_slice)),
        y: y.to_vec(),
        groups: (0..y.len() as u32).collect(),
    }
}

fn train_accuracy(model: &dyn ProbabilisticModel, data: &LabeledDataset) -> f64 {
    let probs = model.predict_rows(&data.x).unwrap();
    let hits = probs
        .iter()
        .zip(&data.y)
        .filter(|(p, &y)| topk_indices(&data.labels, p, 1).unwrap()[0] == y as usize)
        .count();
    hits as f64 / data.len() as f64
}

fn blobs(n: usize, seed: u64) -> LabeledDataset {
    let mut r = ipa_ppm::rng::stream(seed, 0);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = (i % 2) as u32;
        let centre = if c == 0 { -4.0 } else { 4.0 };
        rows.push(vec![centre + noise.sample(&mut r), centre + noise.sample(&mut r)]);
        y.push(c);
    }
    dataset(&rows, &y, &["a", "b"])
}

/// Four clusters where the label is the XOR of the coordinate signs.
fn xor(n: usize, seed: u64) -> LabeledDataset {
    let mut r = ipa_ppm::rng::stream(seed, 0);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let (sx, sy) = ((i % 2) as f64 * 2.0 - 1.0, ((i / 2) % 2) as f64 * 2.0 - 1.0);
        rows.push(vec![3.0 * sx + noise.sample(&mut r), 3.0 * sy + noise.sample(&mut r)]);
        y.push(u32::from(sx * sy > 0.0));
    }
    dataset(&rows, &y, &["a", "b"])
}

/// Five features; only feature 3 decides the label.
fn planted(n: usize, seed: u64) -> LabeledDataset {
    let mut r = ipa_ppm::rng::stream(seed, 0);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..5).map(|_| r.random_range(0.0..1.0)).collect();
        y.push(if row[3] < 0.33 { 0 } else if row[3] < 0.66 { 1 } else { 2 });
        rows.push(row);
    }
    dataset(&rows, &y, &["x", "y", "z"])
}

fn small_gbdt(n_trees: usize, depth: usize) -> GbdtHyper {
    GbdtHyper { n_trees, max_depth: depth, min_samples_leaf: 5, ..Default::default() }
}

#[test]
fn logistic_separates_blobs() {
    let data = blobs(200, 1);
    let model = train_logistic(&data, &LogisticHyper::default(), 7).unwrap();
    assert_eq!(train_accuracy(&model, &data), 1.0);
}

#[test]
fn logistic_loss_never_increases_and_beats_the_zero_model() {
    let data = planted(600, 2);
    let model = train_logistic(&data, &LogisticHyper::default(), 3).unwrap();
    let h = &model.loss_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0]), "loss went up");
    assert!(h.last().unwrap() <= &h[0]);
    assert!((h[0] - 3f64.ln()).abs() < 1e-12, "zero parameters give a uniform distribution");
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = ipa_ppm::rng::stream(5, 5);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![r.random_range(0.0..5.0), f64::from(i % 2), 0.0, r.random_range(-2.0..2.0)])
        .collect();
    let y: Vec<u32> = (0..40).map(|i| (i % 3) as u32).collect();
    let data = dataset(&rows, &y, &["a", "b", "c"]);
    let objective = SoftmaxObjective::new(&data, 0.01);
    let params: Vec<f64> = (0..objective.n_params()).map(|_| r.random_range(-0.5..0.5)).collect();
    let (_, grad) = objective.loss_and_gradient(&params);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let j = r.random_range(0..params.len());
        let mut up = params.clone();
        let mut down = params.clone();
        up[j] += h;
        down[j] -= h;
        let numeric = (objective.loss(&up) - objective.loss(&down)) / (2.0 * h);
        let rel = (numeric - grad[j]).abs() / numeric.abs().max(grad[j].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-4, "max relative error {worst}");
}

#[test]
fn distributions_sum_to_one() {
    let data = planted(400, 4);
    let logit = train(&data, Learner::Logit, &Hyper::default(), 1).unwrap();
    let gbdt = train(&data, Learner::Gbdt, &Hyper { gbdt: small_gbdt(20, 3), ..Default::default() }, 1).unwrap();
    for model in [&logit, &gbdt] {
        for p in model.predict_rows(&data.x).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn untrained_ensemble_predicts_priors() {
    let data = planted(300, 6);
    let model = train_gbdt(&data, &small_gbdt(0, 1), 1).unwrap();
    let mut counts = [0.0; 3];
    for &y in &data.y {
        counts[y as usize] += 1.0;
    }
    let p = model.predict_distribution(&[0.5; 5]).unwrap();
    for c in 0..3 {
        assert!((p[c] - counts[c] / 300.0).abs() < 1e-9);
    }
}

#[test]
fn boosting_fits_xor() {
    let data = xor(400, 8);
    let model = train_gbdt(&data, &small_gbdt(30, 2), 1).unwrap();
    assert!(train_accuracy(&model, &data) >= 0.95);
    let linear = train_logistic(&data, &LogisticHyper::default(), 1).unwrap();
    assert!(train_accuracy(&linear, &data) < 0.8, "a linear model should not fit XOR");
}

#[test]
fn planted_feature_has_the_largest_importance() {
    let data = planted(600, 9);
    let model = train_gbdt(&data, &small_gbdt(15, 3), 1).unwrap();
    let imp = model.feature_importances().unwrap();
    let best = imp.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best.0, "f3");
    assert!((imp.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(matches!(
        train_logistic(&data, &LogisticHyper::default(), 1).unwrap().feature_importances(),
        Err(LearnError::NoImportances)
    ));
}

#[test]
fn boosting_loss_is_non_increasing_and_stages_are_consistent() {
    let data = planted(500, 10);
    let n = 24;
    let model = train_gbdt(&data, &small_gbdt(n, 3), 2).unwrap();
    let h = &model.loss_history;
    assert_eq!(h.len(), n + 1);
    assert!(h.windows(2).all(|w| w[1] <= w[0]));
    for t in [1, n / 2, n] {
        let probs: Vec<Vec<f64>> = (0..data.len())
            .map(|i| {
                let (idx, val) = data.x.row(i);
                model.predict_staged(idx, val, t)
            })
            .collect();
        assert!((log_loss(&probs, &data.y) - h[t]).abs() < 1e-12, "stage {t}");
        let snapshot = model.truncated(t).predict_rows(&data.x).unwrap();
        assert_eq!(snapshot, probs);
    }
}

#[test]
fn uninformative_features_give_prior_distributions() {
    let mut r = ipa_ppm::rng::stream(12, 0);
    let weights = [0.5, 0.3, 0.2];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..4000 {
        let u: f64 = r.random();
        y.push(if u < 0.5 { 0 } else if u < 0.8 { 1 } else { 2 });
        rows.push(vec![r.random_range(0.0..1.0), f64::from(r.random_bool(0.5))]);
    }
    let data = dataset(&rows, &y, &["a", "b", "c"]);
    let mut empirical = [0.0; 3];
    for &t in &y {
        empirical[t as usize] += 1.0 / 4000.0;
    }
    let gbdt_hyper = GbdtHyper { n_trees: 10, max_depth: 2, min_samples_leaf: 200, ..Default::default() };
    let models = [
        train(&data, Learner::Logit, &Hyper::default(), 1).unwrap(),
        train(&data, Learner::Gbdt, &Hyper { gbdt: gbdt_hyper, ..Default::default() }, 1).unwrap(),
    ];
    for model in &models {
        let probs = model.predict_rows(&data.x).unwrap();
        for c in 0..3 {
            let mean = probs.iter().map(|p| p[c]).sum::<f64>() / probs.len() as f64;
            assert!((mean - empirical[c]).abs() <= 0.02, "{:?} label {c}: {mean}", model.learner());
            assert!((empirical[c] - weights[c]).abs() < 0.03);
        }
    }
}

#[test]
fn bad_training_data_is_rejected() {
    let data = dataset(&[vec![1.0], vec![2.0]], &[0, 0], &["a", "b"]);
    assert!(matches!(train_logistic(&data, &LogisticHyper::default(), 1), Err(LearnError::SingleLabel(1))));
    assert!(matches!(train_gbdt(&data, &GbdtHyper::default(), 1), Err(LearnError::SingleLabel(1))));
    let data = dataset(&[vec![1.0], vec![f64::NAN]], &[0, 1], &["a", "b"]);
    assert!(matches!(train_logistic(&data, &LogisticHyper::default(), 1), Err(LearnError::NonFinite { row: 1, .. })));
    let bad = GbdtHyper { max_depth: 0, ..Default::default() };
    assert!(matches!(train_gbdt(&blobs(20, 1), &bad, 1), Err(LearnError::InvalidHyper(_))));
}

#[test]
fn topk_contracts() {
    let data = planted(300, 13);
    let model = train(&data, Learner::Gbdt, &Hyper { gbdt: small_gbdt(5, 2), ..Default::default() }, 1).unwrap();
    let x = data.x.dense_row(0);
    let mut all: Vec<String> = predict_topk(&model, &x, 3).unwrap().into_iter().map(|p| p.0).collect();
    all.sort();
    assert_eq!(all, data.labels);
    assert!(matches!(predict_topk(&model, &x, 0), Err(LearnError::InvalidK)));
    assert!(matches!(model.predict_distribution(&[1.0]), Err(LearnError::FeatureCount { expected: 5, found: 1 })));
}

#[test]
fn models_round_trip_through_json() {
    let data = planted(300, 14);
    for learner in Learner::ALL {
        let model = train(&data, learner, &Hyper { gbdt: small_gbdt(8, 3), ..Default::default() }, 3).unwrap();
        let text = model.to_json();
        let back = Model::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.predict_rows(&data.x).unwrap(), model.predict_rows(&data.x).unwrap());
        let wrong = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(Model::from_json(&wrong), Err(LearnError::Format(_))));
    }
}

#[test]
fn training_is_identical_across_thread_counts() {
    let data = planted(800, 15);
    let hyper = Hyper { gbdt: small_gbdt(10, 3), ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| Learner::ALL.map(|l| train(&data, l, &hyper, 21).unwrap().to_json()))
    };
    assert_eq!(run(1), run(4));
}
