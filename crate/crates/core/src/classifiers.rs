//! The shared classifier contract plus k-nearest neighbours, Gaussian naive
//! Bayes and multinomial logistic regression.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Rasa;
use crate::packed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("feature rows ({rows}) and labels ({labels}) disagree in count")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("k = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("class {rasa} has {count} row(s), at least {needed} required")]
    ClassTooSmall { rasa: Rasa, count: usize, needed: usize },
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("loss became non-finite at iteration {iteration}")]
    DivergenceDetected { iteration: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Feature matrix with one rasa label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Rasa>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Rasa>) -> Result<Self, ModelError> {
        if features.len() != labels.len() {
            return Err(ModelError::LengthMismatch {
                rows: features.len(),
                labels: labels.len(),
            });
        }
        let dim = features.first().map_or(0, Vec::len);
        for (row, f) in features.iter().enumerate() {
            if f.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    row,
                    expected: dim,
                    got: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { row });
            }
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Rasa] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Distinct labels in rasa order.
    pub fn classes(&self) -> Vec<Rasa> {
        let mut present = [false; Rasa::COUNT];
        for l in &self.labels {
            present[l.index()] = true;
        }
        Rasa::ALL.into_iter().filter(|r| present[r.index()]).collect()
    }

    /// Label of every row as an index into `classes`.
    pub fn class_indices(&self, classes: &[Rasa]) -> Vec<usize> {
        self.labels
            .iter()
            .map(|l| classes.iter().position(|c| c == l).expect("label among classes"))
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn count(&self, rasa: Rasa) -> usize {
        self.labels.iter().filter(|&&l| l == rasa).count()
    }

    fn require_non_empty(&self) -> Result<(), ModelError> {
        if self.is_empty() {
            Err(ModelError::EmptyData)
        } else {
            Ok(())
        }
    }
}

/// Index of the largest value; the earliest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Uniform surface over every fitted model.
pub trait Classifier {
    /// Classes in rasa order; score vectors follow this order.
    fn classes(&self) -> &[Rasa];

    /// One finite score per class.
    fn predict_scores(&self, x: &[f64]) -> Vec<f64>;

    /// Argmax of [`Classifier::predict_scores`], ties going to the earlier class.
    fn predict(&self, x: &[f64]) -> Rasa {
        self.classes()[argmax(&self.predict_scores(x))]
    }

    fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<Rasa> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    /// Fraction of coordinates that are not exactly equal.
    Hamming,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Hamming => {
                if a.is_empty() {
                    return 0.0;
                }
                a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
            }
        }
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "hamming" => Ok(Metric::Hamming),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Hamming => "hamming",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Uniform,
    /// Votes weighted by `1/d`; when any selected neighbour sits at `d = 0`,
    /// only the exact matches vote.
    Distance,
}

impl FromStr for Weights {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Weights::Uniform),
            "distance" => Ok(Weights::Distance),
            other => Err(format!("unknown weighting {other:?}")),
        }
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weights::Uniform => "uniform",
            Weights::Distance => "distance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
    pub weights: Weights,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 5,
            metric: Metric::Euclidean,
            weights: Weights::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    classes: Vec<Rasa>,
    #[serde(with = "packed::matrix")]
    rows: Vec<Vec<f64>>,
    #[serde(with = "packed::indices")]
    labels: Vec<usize>,
}

/// Stores the training set; all work happens at query time.
pub fn knn_fit(data: &Dataset, params: KnnParams) -> Result<KnnModel, ModelError> {
    data.require_non_empty()?;
    if params.k == 0 {
        return Err(ModelError::InvalidParam("k must be at least 1".into()));
    }
    if params.k > data.len() {
        return Err(ModelError::KTooLarge {
            k: params.k,
            rows: data.len(),
        });
    }
    let classes = data.classes();
    Ok(KnnModel {
        params,
        labels: data.class_indices(&classes),
        rows: data.features().to_vec(),
        classes,
    })
}

impl KnnModel {
    /// The `k` nearest training rows as `(row, distance)`, ordered by distance then row index.
    pub fn neighbours(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, self.params.metric.distance(x, r)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(self.params.k);
        all
    }
}

impl Classifier for KnnModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let neighbours = self.neighbours(x);
        let mut votes = vec![0.0; self.classes.len()];
        let exact = neighbours.iter().any(|&(_, d)| d == 0.0);
        for &(i, d) in &neighbours {
            let w = match self.params.weights {
                Weights::Uniform => 1.0,
                Weights::Distance if exact => {
                    if d == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Weights::Distance => 1.0 / d,
            };
            votes[self.labels[i]] += w;
        }
        let total: f64 = votes.iter().sum();
        votes.into_iter().map(|v| v / total).collect()
    }
}

/// Smallest per-feature variance kept by Gaussian naive Bayes.
pub const GNB_VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    classes: Vec<Rasa>,
    #[serde(with = "packed::vec")]
    log_priors: Vec<f64>,
    #[serde(with = "packed::matrix")]
    means: Vec<Vec<f64>>,
    #[serde(with = "packed::matrix")]
    variances: Vec<Vec<f64>>,
}

pub fn gnb_fit(data: &Dataset) -> Result<GaussianNbModel, ModelError> {
    data.require_non_empty()?;
    let classes = data.classes();
    let dim = data.dim();
    let mut log_priors = Vec::new();
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for &c in &classes {
        let rows: Vec<&Vec<f64>> = data
            .features()
            .iter()
            .zip(data.labels())
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r)
            .collect();
        if rows.len() < 2 {
            return Err(ModelError::ClassTooSmall {
                rasa: c,
                count: rows.len(),
                needed: 2,
            });
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let var: Vec<f64> = (0..dim)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                v.max(GNB_VARIANCE_FLOOR)
            })
            .collect();
        log_priors.push((n / data.len() as f64).ln());
        means.push(mean);
        variances.push(var);
    }
    Ok(GaussianNbModel {
        classes,
        log_priors,
        means,
        variances,
    })
}

impl GaussianNbModel {
    /// Unnormalised log posterior per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&prior, (mean, var))| {
                prior
                    + x.iter()
                        .zip(mean.iter().zip(var))
                        .map(|(&xi, (&m, &v))| -0.5 * (ln_2pi + v.ln()) - (xi - m).powi(2) / (2.0 * v))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    pub fn priors(&self) -> Vec<f64> {
        self.log_priors.iter().map(|l| l.exp()).collect()
    }
}

impl Classifier for GaussianNbModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub max_iter: usize,
    pub learning_rate: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            learning_rate: 0.1,
        }
    }
}

/// Weight matrix (classes x features) and bias vector of a softmax regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegWeights {
    #[serde(with = "packed::matrix")]
    pub weights: Vec<Vec<f64>>,
    #[serde(with = "packed::vec")]
    pub bias: Vec<f64>,
}

impl LogRegWeights {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: vec![vec![0.0; dim]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    /// Mean cross-entropy over `rows` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, rows: &[Vec<f64>], targets: &[usize]) -> (f64, LogRegWeights) {
        let mut grad = LogRegWeights::zeros(self.bias.len(), self.weights.first().map_or(0, Vec::len));
        let mut loss = 0.0;
        let n = rows.len() as f64;
        for (x, &t) in rows.iter().zip(targets) {
            let p = softmax(&self.logits(x));
            loss -= p[t].ln();
            for (c, &pc) in p.iter().enumerate() {
                let delta = (pc - if c == t { 1.0 } else { 0.0 }) / n;
                grad.bias[c] += delta;
                for (g, &xi) in grad.weights[c].iter_mut().zip(x) {
                    *g += delta * xi;
                }
            }
        }
        (loss / n, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub params: LogRegParams,
    classes: Vec<Rasa>,
    pub fitted: LogRegWeights,
}

impl LogRegModel {
    /// Untrained (all-zero) model over the given classes.
    pub fn zeroed(classes: Vec<Rasa>, dim: usize, params: LogRegParams) -> Self {
        Self {
            params,
            fitted: LogRegWeights::zeros(classes.len(), dim),
            classes,
        }
    }
}

impl Classifier for LogRegModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.fitted.logits(x))
    }
}

/// Full-batch gradient descent from zero weights; returns the model and the
/// loss recorded before each update (plus the final loss).
pub fn logreg_fit_traced(
    data: &Dataset,
    params: LogRegParams,
) -> Result<(LogRegModel, Vec<f64>), ModelError> {
    data.require_non_empty()?;
    if params.max_iter == 0 {
        return Err(ModelError::InvalidParam("max_iter must be at least 1".into()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(ModelError::InvalidParam(format!(
            "learning_rate {} must be positive",
            params.learning_rate
        )));
    }
    let classes = data.classes();
    let targets = data.class_indices(&classes);
    let mut model = LogRegModel::zeroed(classes, data.dim(), params);
    let mut losses = Vec::with_capacity(params.max_iter + 1);
    for iteration in 0..params.max_iter {
        let (loss, grad) = model.fitted.loss_and_gradient(data.features(), &targets);
        if !loss.is_finite() {
            return Err(ModelError::DivergenceDetected { iteration });
        }
        losses.push(loss);
        let w = &mut model.fitted;
        for (row, grow) in w.weights.iter_mut().zip(&grad.weights) {
            for (p, g) in row.iter_mut().zip(grow) {
                *p -= params.learning_rate * g;
            }
        }
        for (b, g) in w.bias.iter_mut().zip(&grad.bias) {
            *b -= params.learning_rate * g;
        }
    }
    let (loss, _) = model.fitted.loss_and_gradient(data.features(), &targets);
    if !loss.is_finite() {
        return Err(ModelError::DivergenceDetected {
            iteration: params.max_iter,
        });
    }
    losses.push(loss);
    Ok((model, losses))
}

pub fn logreg_fit(data: &Dataset, params: LogRegParams) -> Result<LogRegModel, ModelError> {
    logreg_fit_traced(data, params).map(|(m, _)| m)
}
