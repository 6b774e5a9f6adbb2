use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, Hyperparameters, ModelError};
use crate::corpus::Label;
use crate::features::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    Hinge,
}

/// Dense linear model `w . x + b` trained under a logistic or hinge loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LossKind,
    pub hyperparameters: Hyperparameters,
}

impl LinearModel {
    pub fn zeros(dim: usize, loss: LossKind, hyperparameters: Hyperparameters) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            loss,
            hyperparameters,
        }
    }

    /// Logistic probability of Suggestion.
    pub fn probability(&self, x: &SparseVector) -> f64 {
        sigmoid(self.raw_decision(x))
    }
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn raw_decision(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }
}

/// Per-epoch training objective values (after each epoch).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_loss: f64,
    pub epoch_loss: Vec<f64>,
}

/// Objective value and (sub)gradient at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn half_sq_norm(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Mean cross-entropy plus `(l2 / 2) |w|^2` and its gradient. The bias is
/// not regularized.
pub fn logistic_objective(
    weights: &[f64],
    bias: f64,
    features: &[SparseVector],
    labels: &[Label],
    l2: f64,
) -> Objective {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad_weights: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for (x, &l) in features.iter().zip(labels) {
        let z = x.dot_dense(weights) + bias;
        let y = if l.is_positive() { 1.0 } else { 0.0 };
        loss += if l.is_positive() {
            softplus(-z)
        } else {
            softplus(z)
        };
        let r = (sigmoid(z) - y) / n;
        for (i, v) in x.iter() {
            grad_weights[i] += r * v;
        }
        grad_bias += r;
    }
    Objective {
        loss: loss / n + l2 * half_sq_norm(weights),
        grad_weights,
        grad_bias,
    }
}

/// Mean hinge loss plus `(l2 / 2) |w|^2` and a subgradient. At the kink
/// (margin exactly 1) the zero subgradient is chosen.
pub fn svm_objective(
    weights: &[f64],
    bias: f64,
    features: &[SparseVector],
    labels: &[Label],
    l2: f64,
) -> Objective {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad_weights: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for (x, &l) in features.iter().zip(labels) {
        let y = if l.is_positive() { 1.0 } else { -1.0 };
        let margin = y * (x.dot_dense(weights) + bias);
        if margin < 1.0 {
            loss += 1.0 - margin;
            for (i, v) in x.iter() {
                grad_weights[i] -= y * v / n;
            }
            grad_bias -= y / n;
        }
    }
    Objective {
        loss: loss / n + l2 * half_sq_norm(weights),
        grad_weights,
        grad_bias,
    }
}

const MAX_HALVINGS: usize = 60;

/// Full-batch gradient descent on the logistic objective.
///
/// Each epoch takes one step at the scheduled rate; if that step would raise
/// the objective the step is halved until it does not, so the logged loss is
/// non-increasing.
pub fn logistic_fit(
    features: &[SparseVector],
    labels: &[Label],
    dim: usize,
    hp: &Hyperparameters,
) -> Result<(LinearModel, TrainingLog), ModelError> {
    if hp.epochs == 0 {
        return Err(ModelError::InvalidEpochs);
    }
    check_training_set(features, labels, dim)?;
    let mut model = LinearModel::zeros(dim, LossKind::Logistic, *hp);
    let mut current = logistic_objective(&model.weights, model.bias, features, labels, hp.l2);
    if !current.loss.is_finite() {
        return Err(ModelError::Diverged { epoch: 0 });
    }
    let mut log = TrainingLog {
        initial_loss: current.loss,
        epoch_loss: Vec::with_capacity(hp.epochs),
    };
    let mut trial = vec![0.0; dim];
    for epoch in 0..hp.epochs {
        let mut step = hp.rate_at(epoch);
        for _ in 0..MAX_HALVINGS {
            for ((t, w), g) in trial
                .iter_mut()
                .zip(&model.weights)
                .zip(&current.grad_weights)
            {
                *t = w - step * g;
            }
            let bias = model.bias - step * current.grad_bias;
            let next = logistic_objective(&trial, bias, features, labels, hp.l2);
            if next.loss.is_finite() && next.loss <= current.loss {
                model.weights.copy_from_slice(&trial);
                model.bias = bias;
                current = next;
                break;
            }
            step *= 0.5;
        }
        if !current.loss.is_finite() {
            return Err(ModelError::Diverged { epoch: epoch + 1 });
        }
        log.epoch_loss.push(current.loss);
    }
    Ok((model, log))
}

/// Shuffled stochastic subgradient descent on the hinge objective.
///
/// The visiting order is reshuffled every epoch from a generator seeded with
/// `hp.seed`. Weights are stored as `scale * v` so that the L2 shrink costs
/// O(1) per example.
pub fn svm_fit(
    features: &[SparseVector],
    labels: &[Label],
    dim: usize,
    hp: &Hyperparameters,
) -> Result<(LinearModel, TrainingLog), ModelError> {
    if hp.epochs == 0 {
        return Err(ModelError::InvalidEpochs);
    }
    check_training_set(features, labels, dim)?;
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let initial = svm_objective(&v, bias, features, labels, hp.l2).loss;
    if !initial.is_finite() {
        return Err(ModelError::Diverged { epoch: 0 });
    }
    let mut log = TrainingLog {
        initial_loss: initial,
        epoch_loss: Vec::with_capacity(hp.epochs),
    };
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let lr = hp.rate_at(epoch);
        let shrink = 1.0 - lr * hp.l2;
        for &i in &order {
            let x = &features[i];
            let y = if labels[i].is_positive() { 1.0 } else { -1.0 };
            let margin = y * (scale * x.dot_dense(&v) + bias);
            if shrink > 0.0 {
                scale *= shrink;
            } else {
                v.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let k = lr * y / scale;
                for (j, xv) in x.iter() {
                    v[j] += k * xv;
                }
                bias += lr * y;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let loss = svm_objective(&w, bias, features, labels, hp.l2).loss;
        if !loss.is_finite() {
            return Err(ModelError::Diverged { epoch: epoch + 1 });
        }
        log.epoch_loss.push(loss);
    }
    let model = LinearModel {
        weights: v.iter().map(|x| x * scale).collect(),
        bias,
        loss: LossKind::Hinge,
        hyperparameters: *hp,
    };
    Ok((model, log))
}
