use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ModelError};
use crate::corpus::Label;
use crate::features::SparseVector;

/// Multinomial naive Bayes with additive (Laplace) smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBModel {
    pub alpha: f64,
    /// `[non_suggestion, suggestion]`
    pub log_prior: [f64; 2],
    /// Per class, per term log probability.
    pub log_likelihood: [Vec<f64>; 2],
}

fn class_slot(l: Label) -> usize {
    match l {
        Label::NonSuggestion => 0,
        Label::Suggestion => 1,
    }
}

/// `log_prior(c) = ln(n_c / n)` and
/// `log_likelihood(c, t) = ln((count(t, c) + alpha) / (total(c) + alpha * dim))`.
pub fn nb_fit(
    features: &[SparseVector],
    labels: &[Label],
    dim: usize,
    alpha: f64,
) -> Result<NBModel, ModelError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidAlpha(alpha));
    }
    check_training_set(features, labels, dim)?;
    let mut counts = [vec![0.0f64; dim], vec![0.0f64; dim]];
    let mut docs = [0usize; 2];
    for (x, &l) in features.iter().zip(labels) {
        let c = class_slot(l);
        docs[c] += 1;
        for (i, v) in x.iter() {
            if v < 0.0 {
                return Err(ModelError::NegativeCount { index: i, value: v });
            }
            counts[c][i] += v;
        }
    }
    let n = labels.len() as f64;
    let log_prior = [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()];
    let log_likelihood = counts.map(|row| {
        let total: f64 = row.iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        row.iter().map(|&c| (c + alpha).ln() - denom).collect()
    });
    Ok(NBModel {
        alpha,
        log_prior,
        log_likelihood,
    })
}

impl NBModel {
    /// Unnormalized joint log probability `ln P(c) + sum_t x_t ln P(t | c)`.
    pub fn joint_log_likelihood(&self, x: &SparseVector, class: Label) -> f64 {
        let c = class_slot(class);
        self.log_prior[c] + x.dot_dense(&self.log_likelihood[c])
    }

    /// Log posterior of each class, normalized with log-sum-exp.
    pub fn log_posterior(&self, x: &SparseVector) -> [f64; 2] {
        let j = [
            self.joint_log_likelihood(x, Label::NonSuggestion),
            self.joint_log_likelihood(x, Label::Suggestion),
        ];
        let m = j[0].max(j[1]);
        let lse = m + ((j[0] - m).exp() + (j[1] - m).exp()).ln();
        [j[0] - lse, j[1] - lse]
    }
}

impl Classifier for NBModel {
    fn dim(&self) -> usize {
        self.log_likelihood[0].len()
    }

    /// Log posterior odds of Suggestion.
    fn raw_decision(&self, x: &SparseVector) -> f64 {
        self.joint_log_likelihood(x, Label::Suggestion)
            - self.joint_log_likelihood(x, Label::NonSuggestion)
    }
}
