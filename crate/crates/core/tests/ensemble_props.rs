mod common;

use rand::Rng;
use raga_moodkit::catalog::Rasa;
use raga_moodkit::classifiers::{logreg_fit_traced, Classifier, Dataset, LogRegParams, LogRegWeights};
use raga_moodkit::ensemble::{
    forest_fit, mlp_fit_traced, tree_fit, Criterion, ForestParams, MlpParams, Network, TreeParams,
};

fn distinct_points(n: usize, seed: u64) -> Dataset {
    let mut r = common::rng(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let y = (0..n).map(|_| Rasa::ALL[r.gen_range(0..4)]).collect();
    Dataset::new(x, y).unwrap()
}

#[test]
fn unrestricted_tree_memorises_distinct_points() {
    for criterion in [Criterion::Gini, Criterion::Entropy] {
        let data = distinct_points(80, 2);
        let params = TreeParams {
            criterion,
            ..TreeParams::default()
        };
        let tree = tree_fit(&data, params, 0).unwrap();
        let classes = data.classes();
        for (x, y) in data.features().iter().zip(data.labels()) {
            assert_eq!(classes[tree.predict_index(x)], *y);
        }
        let coarse = tree_fit(
            &data,
            TreeParams {
                min_samples_leaf: 5,
                ..params
            },
            0,
        )
        .unwrap();
        assert!(coarse.node_count() <= tree.node_count());
    }
}

#[test]
fn forest_is_deterministic_and_order_free() {
    let data = common::blobs(&common::three(), 20, 5, 4.0, 1);
    let params = ForestParams {
        n_estimators: 12,
        seed: 7,
        ..ForestParams::default()
    };
    let a = forest_fit(&data, params).unwrap();
    let b = forest_fit(&data, params).unwrap();
    assert_eq!(a, b);
    let reversed: Vec<usize> = (0..12).rev().collect();
    let r = a.with_tree_order(&reversed);
    for q in common::random_rows(50, 5, 3) {
        let (sa, sr) = (a.predict_scores(&q), r.predict_scores(&q));
        for (u, v) in sa.iter().zip(&sr) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(a.predict(&q), r.predict(&q));
        assert!((sa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_tree_without_bootstrap_memorises() {
    let data = distinct_points(60, 4);
    let params = ForestParams {
        n_estimators: 1,
        bootstrap: false,
        max_features: 1.0,
        ..ForestParams::default()
    };
    let forest = forest_fit(&data, params).unwrap();
    assert_eq!(forest.predict_batch(data.features()), data.labels());
}

#[test]
fn more_trees_shrink_score_variance() {
    let data = common::blobs(&common::three(), 15, 4, 7.0, 6);
    let q = vec![1.5, 1.5, 0.0, 1.0];
    let variance = |n_estimators: usize| {
        let s: Vec<f64> = (0..20)
            .map(|seed| {
                let params = ForestParams {
                    n_estimators,
                    seed,
                    ..ForestParams::default()
                };
                forest_fit(&data, params).unwrap().predict_scores(&q)[0]
            })
            .collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64
    };
    let (one, many) = (variance(1), variance(40));
    assert!(many < one, "variance with 40 trees {many} not below 1 tree {one}");
}

fn flatten(net: &Network) -> Vec<f64> {
    let mut out: Vec<f64> = net.weights.iter().flatten().flatten().copied().collect();
    out.extend(net.biases.iter().flatten());
    out
}

fn perturbed(net: &Network, index: usize, delta: f64) -> Network {
    let mut n = net.clone();
    let mut i = index;
    for w in n.weights.iter_mut().flatten() {
        if i < w.len() {
            w[i] += delta;
            return n;
        }
        i -= w.len();
    }
    for b in n.biases.iter_mut() {
        if i < b.len() {
            b[i] += delta;
            return n;
        }
        i -= b.len();
    }
    panic!("index out of range");
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let mut r = common::rng(13);
    let net = Network::glorot(&[5, 5, 5, 5, 5, 3], &mut r);
    // nonzero biases so their gradients are exercised off the origin
    let net = {
        let mut n = net;
        for b in n.biases.iter_mut().flatten() {
            *b = r.gen_range(-0.3..0.3);
        }
        n
    };
    let rows = common::random_rows(6, 5, 14);
    let targets = [0, 1, 2, 0, 1, 2];
    let (_, grad) = net.loss_and_gradient(&rows, &targets);
    let analytic = flatten(&grad);
    let h = 1e-5;
    for (i, &g) in analytic.iter().enumerate() {
        let lp = perturbed(&net, i, h).loss_and_gradient(&rows, &targets).0;
        let lm = perturbed(&net, i, -h).loss_and_gradient(&rows, &targets).0;
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
        assert!(rel < 1e-4, "parameter {i}: analytic {g}, numeric {numeric}");
    }
}

#[test]
fn mlp_learns_separable_data() {
    let data = common::blobs(&common::three(), 20, 4, 1.0, 8);
    let params = MlpParams {
        hidden: [16, 16, 16, 16],
        epochs: 200,
        batch_size: 10,
        learning_rate: 0.05,
        seed: 2,
    };
    let (model, history) = mlp_fit_traced(&data, params).unwrap();
    assert_eq!(history.len(), 200);
    assert_eq!(model.predict_batch(data.features()), data.labels());
}

#[test]
fn full_batch_mlp_loss_never_rises() {
    let data = common::blobs(&common::three(), 10, 4, 2.0, 9);
    let params = MlpParams {
        hidden: [6, 6, 6, 6],
        epochs: 60,
        batch_size: data.len(),
        learning_rate: 0.01,
        seed: 4,
    };
    let (_, history) = mlp_fit_traced(&data, params).unwrap();
    assert!(history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{history:?}");
}

#[test]
fn logreg_gradient_matches_central_differences() {
    let mut r = common::rng(17);
    let w = LogRegWeights {
        weights: (0..3).map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect()).collect(),
        bias: (0..3).map(|_| r.gen_range(-1.0..1.0)).collect(),
    };
    let rows = common::random_rows(8, 4, 18);
    let targets = [0, 1, 2, 0, 1, 2, 2, 1];
    let (_, grad) = w.loss_and_gradient(&rows, &targets);
    let h = 1e-5;
    let check = |analytic: f64, plus: LogRegWeights, minus: LogRegWeights| {
        let numeric =
            (plus.loss_and_gradient(&rows, &targets).0 - minus.loss_and_gradient(&rows, &targets).0) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(rel < 1e-6, "analytic {analytic}, numeric {numeric}");
    };
    for c in 0..3 {
        for j in 0..4 {
            let (mut p, mut m) = (w.clone(), w.clone());
            p.weights[c][j] += h;
            m.weights[c][j] -= h;
            check(grad.weights[c][j], p, m);
        }
        let (mut p, mut m) = (w.clone(), w.clone());
        p.bias[c] += h;
        m.bias[c] -= h;
        check(grad.bias[c], p, m);
    }
}

#[test]
fn logreg_loss_is_monotone() {
    let data = common::blobs(&common::three(), 15, 4, 3.0, 19);
    let (model, losses) = logreg_fit_traced(
        &data,
        LogRegParams {
            max_iter: 300,
            learning_rate: 0.1,
        },
    )
    .unwrap();
    assert_eq!(losses.len(), 301);
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(losses[300] < losses[0]);
    assert_eq!(model.predict_batch(data.features()), data.labels());
}
