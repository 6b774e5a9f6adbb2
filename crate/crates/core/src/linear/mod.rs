//! Sparse-feature classifiers: multinomial naive Bayes, logistic regression
//! and a linear SVM, behind the [`Classifier`] trait.

mod naive_bayes;
mod sgd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::SparseVector;

pub use naive_bayes::{nb_fit, NBModel};
pub use sgd::{
    logistic_fit, logistic_objective, svm_fit, svm_objective, LinearModel, LossKind, Objective,
    TrainingLog,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("a class absent from the training labels: no {0} examples")]
    ClassAbsent(Label),
    #[error("smoothing alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("epochs must be at least 1")]
    InvalidEpochs,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature index {index} outside model dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("negative count {value} at feature {index}")]
    NegativeCount { index: usize, value: f64 },
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Training settings shared by the sparse models. Defaults: alpha 1.0,
/// l2 1e-4, learning rate 0.1 decayed as `lr / (1 + decay * epoch)` with
/// decay 0.01, 50 epochs, seed 42.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub l2: f64,
    pub learning_rate: f64,
    pub decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            alpha: 1.0,
            l2: 1e-4,
            learning_rate: 0.1,
            decay: 0.01,
            epochs: 50,
            seed: 42,
        }
    }
}

impl Hyperparameters {
    pub fn rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.decay * epoch as f64)
    }
}

/// Strictly positive decision values mean Suggestion; a tie at zero goes to
/// the majority class, NonSuggestion.
pub fn label_from_decision(value: f64) -> Label {
    if value > 0.0 {
        Label::Suggestion
    } else {
        Label::NonSuggestion
    }
}

pub trait Classifier {
    /// Number of input features the model was fitted on.
    fn dim(&self) -> usize;

    /// Positive means Suggestion. Caller guarantees dimension compatibility.
    fn raw_decision(&self, x: &SparseVector) -> f64;

    fn decision_value(&self, x: &SparseVector) -> Result<f64, ModelError> {
        check_dim(x, self.dim())?;
        Ok(self.raw_decision(x))
    }

    fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        self.decision_value(x).map(label_from_decision)
    }
}

pub(crate) fn check_dim(x: &SparseVector, dim: usize) -> Result<(), ModelError> {
    if x.min_dim() > dim {
        return Err(ModelError::DimensionMismatch {
            index: x.min_dim() - 1,
            dim,
        });
    }
    Ok(())
}

pub(crate) fn check_training_set(
    features: &[SparseVector],
    labels: &[Label],
    dim: usize,
) -> Result<(), ModelError> {
    if features.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    for needed in [Label::Suggestion, Label::NonSuggestion] {
        if !labels.contains(&needed) {
            return Err(ModelError::ClassAbsent(needed));
        }
    }
    for x in features {
        check_dim(x, dim)?;
    }
    Ok(())
}
