//! CART decision trees, bagged random forests and a four-hidden-layer perceptron.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Rasa;
use crate::classifiers::{softmax, Classifier, Dataset, ModelError};
use crate::packed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a class histogram; entropy is in bits.
    pub fn impurity(self, counts: &[f64]) -> f64 {
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|c| {
                    let p = c / total;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

impl FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(format!("unknown criterion {other:?}")),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    /// Fraction of features considered at each node, in (0, 1].
    pub max_features: f64,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: None,
            max_features: 1.0,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(ModelError::InvalidParam(format!(
                "max_features {} must lie in (0, 1]",
                self.max_features
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(ModelError::InvalidParam("min_samples_leaf must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ModelError::InvalidParam("min_samples_split must be at least 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ModelError::InvalidParam("max_depth must be at least 1".into()));
        }
        Ok(())
    }

    fn features_per_node(&self, dim: usize) -> usize {
        ((self.max_features * dim as f64).ceil() as usize).clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class histogram of the training rows that reached this leaf.
    Leaf { counts: Vec<f64> },
}

/// Flat node arrays; `feature = -1` marks a leaf.
#[derive(Serialize, Deserialize)]
struct TreeWire {
    n_classes: usize,
    #[serde(with = "packed::vec")]
    feature: Vec<f64>,
    #[serde(with = "packed::vec")]
    threshold: Vec<f64>,
    #[serde(with = "packed::vec")]
    left: Vec<f64>,
    #[serde(with = "packed::vec")]
    right: Vec<f64>,
    #[serde(with = "packed::matrix")]
    counts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeWire", try_from = "TreeWire")]
pub struct DecisionTree {
    n_classes: usize,
    nodes: Vec<Node>,
}

impl From<DecisionTree> for TreeWire {
    fn from(tree: DecisionTree) -> Self {
        let n = tree.nodes.len();
        let mut wire = TreeWire {
            n_classes: tree.n_classes,
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            counts: Vec::with_capacity(n),
        };
        for node in tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    wire.feature.push(feature as f64);
                    wire.threshold.push(threshold);
                    wire.left.push(left as f64);
                    wire.right.push(right as f64);
                    wire.counts.push(vec![0.0; tree.n_classes]);
                }
                Node::Leaf { counts } => {
                    wire.feature.push(-1.0);
                    wire.threshold.push(0.0);
                    wire.left.push(0.0);
                    wire.right.push(0.0);
                    wire.counts.push(counts);
                }
            }
        }
        wire
    }
}

impl TryFrom<TreeWire> for DecisionTree {
    type Error = String;
    fn try_from(w: TreeWire) -> Result<Self, Self::Error> {
        let n = w.feature.len();
        if [w.threshold.len(), w.left.len(), w.right.len(), w.counts.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err("tree arrays differ in length".into());
        }
        let index = |v: f64| -> Result<usize, String> {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < n {
                Ok(v as usize)
            } else {
                Err(format!("bad node index {v}"))
            }
        };
        let nodes = (0..n)
            .map(|i| {
                if w.feature[i] < 0.0 {
                    if w.counts[i].len() != w.n_classes {
                        return Err("leaf histogram has the wrong width".to_string());
                    }
                    Ok(Node::Leaf {
                        counts: w.counts[i].clone(),
                    })
                } else {
                    Ok(Node::Split {
                        feature: w.feature[i] as usize,
                        threshold: w.threshold[i],
                        left: index(w.left[i])?,
                        right: index(w.right[i])?,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        Ok(DecisionTree {
            n_classes: w.n_classes,
            nodes,
        })
    }
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Leaf class distribution (histogram normalised to sum 1).
    pub fn distribution(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.leaf(x);
        let total: f64 = counts.iter().sum();
        counts.iter().map(|c| c / total).collect()
    }

    /// Class index with the largest leaf count; ties go to the lower index.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        crate::classifiers::argmax(self.leaf(x))
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    n_features: usize,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl TreeBuilder<'_> {
    fn histogram(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1.0;
        }
        counts
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.histogram(&rows);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let too_small = rows.len() < self.params.min_samples_split
            || rows.len() < 2 * self.params.min_samples_leaf;
        let split = if pure || depth_capped || too_small {
            None
        } else {
            self.best_split(&rows)
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf { counts });
            return self.nodes.len() - 1;
        };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[r][split.feature] <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let dim = self.x[0].len();
        let mut features = index::sample(self.rng, dim, self.n_features).into_vec();
        features.sort_unstable();
        let min_leaf = self.params.min_samples_leaf;
        let n = rows.len() as f64;
        let total = self.histogram(rows);
        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for feature in features {
            sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            let mut right = total.clone();
            for pos in 0..sorted.len() - 1 {
                let r = sorted[pos];
                left[self.y[r]] += 1.0;
                right[self.y[r]] -= 1.0;
                let lo = self.x[r][feature];
                let hi = self.x[sorted[pos + 1]][feature];
                let n_left = pos + 1;
                if lo == hi || n_left < min_leaf || sorted.len() - n_left < min_leaf {
                    continue;
                }
                let impurity = (n_left as f64 * self.params.criterion.impurity(&left)
                    + (n - n_left as f64) * self.params.criterion.impurity(&right))
                    / n;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid >= lo && mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

fn fit_tree_indexed(
    x: &[Vec<f64>],
    y: &[usize],
    rows: Vec<usize>,
    n_classes: usize,
    params: TreeParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut builder = TreeBuilder {
        x,
        y,
        n_classes,
        params,
        n_features: params.features_per_node(x[0].len()),
        rng,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    DecisionTree {
        n_classes,
        nodes: builder.nodes,
    }
}

/// Greedy CART over the dataset's classes (leaf histograms follow `data.classes()`).
pub fn tree_fit(data: &Dataset, params: TreeParams, seed: u64) -> Result<DecisionTree, ModelError> {
    params.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let classes = data.classes();
    let y = data.class_indices(&classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(fit_tree_indexed(
        data.features(),
        &y,
        (0..data.len()).collect(),
        classes.len(),
        params,
        &mut rng,
    ))
}

/// One feature per node out of forty is `ceil(0.1582 * 40) = 7 = ceil(sqrt(40))`.
pub const DEFAULT_MAX_FEATURES: f64 = 0.158_113_883_008_418_97;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub max_features: f64,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub seed: u64,
    /// Bootstrap resampling per tree; disabling it is a test hook.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            criterion: Criterion::Gini,
            max_depth: None,
            max_features: DEFAULT_MAX_FEATURES,
            min_samples_leaf: 1,
            min_samples_split: 2,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            criterion: self.criterion,
            max_depth: self.max_depth,
            max_features: self.max_features,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    classes: Vec<Rasa>,
    trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Same model with trees in a different order.
    pub fn with_tree_order(&self, order: &[usize]) -> ForestModel {
        ForestModel {
            params: self.params,
            classes: self.classes.clone(),
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
        }
    }
}

/// Bagged CART ensemble; tree `t` draws from its own ChaCha stream of `seed`.
pub fn forest_fit(data: &Dataset, params: ForestParams) -> Result<ForestModel, ModelError> {
    let tree_params = params.tree_params();
    tree_params.validate()?;
    if params.n_estimators == 0 {
        return Err(ModelError::InvalidParam("n_estimators must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let classes = data.classes();
    let y = data.class_indices(&classes);
    let n = data.len();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_indexed(data.features(), &y, rows, classes.len(), tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params,
        classes,
        trees,
    })
}

impl Classifier for ForestModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    /// Mean of per-tree leaf class distributions.
    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            for (s, p) in scores.iter_mut().zip(tree.distribution(x)) {
                *s += p;
            }
        }
        let n = self.trees.len() as f64;
        scores.into_iter().map(|s| s / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: [usize; 4],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: [256, 128, 64, 32],
            epochs: 100,
            batch_size: 50,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl MlpParams {
    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden.contains(&0) {
            return Err(ModelError::InvalidParam("hidden layers need at least one unit".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::InvalidParam("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Dense layers: `weights[l]` is `out x in`; ReLU between layers, softmax on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    #[serde(with = "packed::matrices")]
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(with = "packed::rows")]
    pub biases: Vec<Vec<f64>>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_out)
                    .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect())
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|r| vec![0.0; r.len()]).collect())
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Activations of every layer, input first; the last entry holds the logits.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = acts.last().expect("input present");
            let z: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            acts.push(if l == last { z } else { z.into_iter().map(|v| v.max(0.0)).collect() });
        }
        acts
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(self.forward_all(x).last().expect("logits"))
    }

    /// Mean cross-entropy over `rows` and the gradient of every weight and bias.
    pub fn loss_and_gradient(&self, rows: &[Vec<f64>], targets: &[usize]) -> (f64, Network) {
        let mut grad = self.zeros_like();
        let mut loss = 0.0;
        let n = rows.len() as f64;
        for (x, &t) in rows.iter().zip(targets) {
            let acts = self.forward_all(x);
            let p = softmax(acts.last().expect("logits"));
            loss -= p[t].ln();
            let mut delta: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(c, &pc)| (pc - if c == t { 1.0 } else { 0.0 }) / n)
                .collect();
            for l in (0..self.weights.len()).rev() {
                let input = &acts[l];
                for (o, &d) in delta.iter().enumerate() {
                    grad.biases[l][o] += d;
                    for (g, &a) in grad.weights[l][o].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    // ReLU derivative: active where the stored activation is positive
                    delta = (0..input.len())
                        .map(|i| {
                            if input[i] > 0.0 {
                                delta
                                    .iter()
                                    .zip(&self.weights[l])
                                    .map(|(d, row)| d * row[i])
                                    .sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        (loss / n, grad)
    }

    /// `self -= rate * grad`.
    pub fn step(&mut self, grad: &Network, rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            for (wr, gr) in w.iter_mut().zip(g) {
                for (a, b) in wr.iter_mut().zip(gr) {
                    *a -= rate * b;
                }
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            for (a, d) in b.iter_mut().zip(g) {
                *a -= rate * d;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    classes: Vec<Rasa>,
    pub network: Network,
}

impl MlpModel {
    /// Freshly initialised, untrained network.
    pub fn initialized(dim: usize, classes: Vec<Rasa>, params: MlpParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut sizes = vec![dim];
        sizes.extend(params.hidden);
        sizes.push(classes.len());
        Self {
            network: Network::glorot(&sizes, &mut rng),
            params,
            classes,
        }
    }
}

impl Classifier for MlpModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        self.network.probabilities(x)
    }
}

/// Mini-batch gradient descent; returns the model and full-data loss after each epoch.
pub fn mlp_fit_traced(data: &Dataset, params: MlpParams) -> Result<(MlpModel, Vec<f64>), ModelError> {
    params.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let classes = data.classes();
    let targets = data.class_indices(&classes);
    let mut model = MlpModel::initialized(data.dim(), classes, params.clone());
    // shuffling uses a separate stream from initialisation
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let rows: Vec<Vec<f64>> = batch.iter().map(|&i| data.features()[i].clone()).collect();
            let ts: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = model.network.loss_and_gradient(&rows, &ts);
            if !loss.is_finite() {
                return Err(ModelError::DivergenceDetected { iteration: epoch });
            }
            model.network.step(&grad, params.learning_rate);
        }
        let (loss, _) = model.network.loss_and_gradient(data.features(), &targets);
        if !loss.is_finite() {
            return Err(ModelError::DivergenceDetected { iteration: epoch });
        }
        history.push(loss);
    }
    Ok((model, history))
}

pub fn mlp_fit(data: &Dataset, params: MlpParams) -> Result<MlpModel, ModelError> {
    mlp_fit_traced(data, params).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: Vec<Vec<f64>>, y: Vec<Rasa>) -> Dataset {
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn impurity_values() {
        assert!((Criterion::Gini.impurity(&[5.0, 5.0]) - 0.5).abs() < 1e-15);
        assert!((Criterion::Entropy.impurity(&[5.0, 5.0]) - 1.0).abs() < 1e-15);
        assert_eq!(Criterion::Gini.impurity(&[4.0, 0.0]), 0.0);
        assert_eq!(Criterion::Entropy.impurity(&[0.0, 4.0]), 0.0);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let d = ds(vec![vec![0.0], vec![1.0]], vec![Rasa::Karuna; 2]);
        let t = tree_fit(&d, TreeParams::default(), 0).unwrap();
        assert_eq!(t.node_count(), 1);
    }

    #[test]
    fn single_split_at_midpoint() {
        let d = ds(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![Rasa::Karuna, Rasa::Karuna, Rasa::Veera, Rasa::Veera],
        );
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let t = tree_fit(&d, TreeParams { criterion, ..TreeParams::default() }, 0).unwrap();
            assert_eq!(t.node_count(), 3);
            match &t.nodes()[0] {
                Node::Split { feature, threshold, .. } => {
                    assert_eq!(*feature, 0);
                    assert_eq!(*threshold, 1.5);
                }
                other => panic!("expected split, got {other:?}"),
            }
        }
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let y: Vec<Rasa> = (0..16).map(|i| Rasa::ALL[i % 2]).collect();
        let d = ds(x, y);
        let deep = tree_fit(&d, TreeParams::default(), 0).unwrap();
        let shallow = tree_fit(&d, TreeParams { max_depth: Some(1), ..TreeParams::default() }, 0).unwrap();
        assert_eq!(shallow.node_count(), 3);
        let leafy = tree_fit(&d, TreeParams { min_samples_leaf: 5, ..TreeParams::default() }, 0).unwrap();
        assert!(leafy.node_count() <= deep.node_count());
        fn leaf_sizes(t: &DecisionTree) -> Vec<f64> {
            t.nodes()
                .iter()
                .filter_map(|n| match n {
                    Node::Leaf { counts } => Some(counts.iter().sum()),
                    _ => None,
                })
                .collect()
        }
        assert!(leaf_sizes(&leafy).iter().all(|&s| s >= 5.0));
        assert_eq!(leaf_sizes(&deep).iter().sum::<f64>(), 16.0);
    }

    #[test]
    fn tree_json_round_trip() {
        let d = ds(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 1.0]],
            vec![Rasa::Karuna, Rasa::Shantha, Rasa::Veera, Rasa::Veera],
        );
        let t = tree_fit(&d, TreeParams::default(), 3).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: DecisionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn bad_params_rejected() {
        let d = ds(vec![vec![0.0], vec![1.0]], vec![Rasa::Karuna, Rasa::Veera]);
        assert!(tree_fit(&d, TreeParams { max_features: 0.0, ..TreeParams::default() }, 0).is_err());
        assert!(forest_fit(&d, ForestParams { n_estimators: 0, ..ForestParams::default() }).is_err());
        let empty = ds(vec![], vec![]);
        assert_eq!(tree_fit(&empty, TreeParams::default(), 0), Err(ModelError::EmptyData));
        assert!(mlp_fit(&d, MlpParams { epochs: 0, ..MlpParams::default() }).is_err());
    }

    #[test]
    fn untrained_mlp_is_near_uniform() {
        let m = MlpModel::initialized(
            4,
            Rasa::ALL.to_vec(),
            MlpParams { hidden: [5, 5, 5, 5], ..MlpParams::default() },
        );
        let s = m.predict_scores(&[0.1, -0.2, 0.3, 0.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(s.iter().all(|&p| (p - 1.0 / 6.0).abs() < 0.1));
    }
}
