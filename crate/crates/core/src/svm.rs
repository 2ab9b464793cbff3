//! RBF support vector machine trained by sequential minimal optimization,
//! with one-vs-one multiclass voting.
//!
//! The binary solver works on the dual
//! `max W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)`
//! subject to `0 <= a_i <= C` and `sum a_i y_i = 0`. Each step picks the
//! maximal violating pair and solves the two-variable subproblem in closed
//! form. The solver stops once the violation gap `m(a) - M(a)` falls to `tol`,
//! at which point every KKT condition holds within `tol / 2` for the bias
//! `b = (m + M) / 2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Rasa;
use crate::classifiers::{Classifier, Dataset, ModelError};
use crate::packed;

/// Curvature substitute when the pair's kernel rows coincide.
const MIN_CURVATURE: f64 = 1e-12;

/// `exp(-gamma * |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            gamma: 0.1,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ModelError::InvalidParam(format!("C = {} must be positive", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "gamma = {} must be positive",
                self.gamma
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(ModelError::InvalidParam(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(ModelError::InvalidParam("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Support vectors with coefficients `a_i y_i` and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    #[serde(with = "packed::matrix")]
    pub support_vectors: Vec<Vec<f64>>,
    #[serde(with = "packed::vec")]
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

impl BinarySvmModel {
    /// `f(x) = sum_i a_i y_i K(sv_i, x) + b`; positive means the `+1` class.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &coef)| coef * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

/// Full solver state, kept for diagnostics and convergence checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    /// One multiplier per training row.
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective after every pair update, starting from `W(0) = 0`.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_binary_labels(y: &[f64]) -> Result<(), ModelError> {
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(ModelError::InvalidParam(format!("label {bad} is not +1 or -1")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// Trains a binary RBF SVM and returns the full solver state alongside the model.
pub fn smo_train_binary_traced(
    x: &[Vec<f64>],
    y: &[f64],
    params: SvmParams,
) -> Result<(BinarySvmModel, SmoSolution), ModelError> {
    params.validate()?;
    if x.is_empty() {
        return Err(ModelError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    check_binary_labels(y)?;

    let n = x.len();
    let c = params.c;
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf_kernel(&x[i], &x[j], params.gamma)).collect())
        .collect();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];

    let mut alpha = vec![0.0; n];
    // gradient of the minimisation form 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];
    let mut objective = vec![0.0];
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let (mut gap_hi, mut gap_lo) = (0.0, 0.0);
    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m {
                m = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < big_m {
                big_m = v;
                j = t;
            }
        }
        gap_hi = m;
        gap_lo = big_m;
        if i == usize::MAX || j == usize::MAX || m - big_m <= params.tol {
            converged = true;
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = MIN_CURVATURE;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = old_i - old_j;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = MIN_CURVATURE;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = old_i + old_j;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        iterations += 1;
        objective.push(dual_from_gradient(&alpha, &grad));
    }

    let bias = if converged && gap_hi.is_finite() && gap_lo.is_finite() {
        (gap_hi + gap_lo) / 2.0
    } else {
        // free multipliers pin the bias; fall back to the gap midpoint otherwise
        let free: Vec<f64> = (0..n)
            .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
            .map(|t| -y[t] * grad[t])
            .collect();
        if free.is_empty() {
            (gap_hi + gap_lo) / 2.0
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        }
    };

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = BinarySvmModel {
        support_vectors: support.iter().map(|&t| x[t].clone()).collect(),
        dual_coef: support.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias,
        gamma: params.gamma,
        c,
    };
    Ok((
        model,
        SmoSolution {
            alpha,
            bias,
            objective,
            iterations,
            converged,
        },
    ))
}

/// `W(a) = 1/2 sum_t a_t (1 - G_t)` where `G = Qa - e`.
fn dual_from_gradient(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

pub fn smo_train_binary(
    x: &[Vec<f64>],
    y: &[f64],
    params: SvmParams,
) -> Result<BinarySvmModel, ModelError> {
    smo_train_binary_traced(x, y, params).map(|(m, _)| m)
}

/// Binary model for classes `positive` (+1) versus `negative` (-1), as indices into the class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub model: BinarySvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    classes: Vec<Rasa>,
    pub pairs: Vec<PairModel>,
}

/// Trains one binary machine per unordered class pair on that pair's rows only.
pub fn ovo_train(data: &Dataset, params: SvmParams) -> Result<SvmModel, ModelError> {
    params.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(ModelError::SingleClass);
    }
    let targets = data.class_indices(&classes);
    let pair_ids: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
        .collect();
    let pairs = pair_ids
        .par_iter()
        .map(|&(a, b)| {
            let rows: Vec<usize> = (0..data.len())
                .filter(|&r| targets[r] == a || targets[r] == b)
                .collect();
            let x: Vec<Vec<f64>> = rows.iter().map(|&r| data.features()[r].clone()).collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|&r| if targets[r] == a { 1.0 } else { -1.0 })
                .collect();
            smo_train_binary(&x, &y, params).map(|model| PairModel {
                positive: a,
                negative: b,
                model,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SvmModel {
        params,
        classes,
        pairs,
    })
}

/// Per-class pairwise votes and summed signed decision values.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTally {
    pub votes: Vec<usize>,
    pub decision_sums: Vec<f64>,
}

impl SvmModel {
    pub fn tally(&self, x: &[f64]) -> VoteTally {
        let k = self.classes.len();
        let mut votes = vec![0; k];
        let mut decision_sums = vec![0.0; k];
        for pair in &self.pairs {
            let d = pair.model.decision(x);
            if d >= 0.0 {
                votes[pair.positive] += 1;
            } else {
                votes[pair.negative] += 1;
            }
            decision_sums[pair.positive] += d;
            decision_sums[pair.negative] -= d;
        }
        VoteTally {
            votes,
            decision_sums,
        }
    }
}

impl Classifier for SvmModel {
    fn classes(&self) -> &[Rasa] {
        &self.classes
    }

    /// Softmax over `votes + 0.5 * s / (1 + |s|)` with `s` the summed decision
    /// value. The squashed term stays inside (-0.5, 0.5), so the argmax is the
    /// vote winner with ties resolved by decision sum, then class order.
    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let tally = self.tally(x);
        let logits: Vec<f64> = tally
            .votes
            .iter()
            .zip(&tally.decision_sums)
            .map(|(&v, &s)| v as f64 + 0.5 * s / (1.0 + s.abs()))
            .collect();
        crate::classifiers::softmax(&logits)
    }
}
