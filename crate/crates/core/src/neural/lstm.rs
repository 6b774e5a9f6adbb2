//! Single-layer LSTM over frozen word embeddings with a sigmoid readout on
//! the final hidden state.
//!
//! Gate rows are stacked as input, forget, output, candidate:
//!
//! ```text
//! z = W [x_t; h_{t-1}] + b
//! i = sigmoid(z_i)  f = sigmoid(z_f)  o = sigmoid(z_o)  g = tanh(z_g)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! p = sigmoid(w_out . h_T + b_out)
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embeddings::{EmbeddingTable, EMBEDDING_DIM};
use super::NeuralError;
use crate::corpus::Label;
use crate::linear::label_from_decision;

pub const HIDDEN_UNITS: usize = 128;
pub const MAX_SEQ_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub max_seq_len: usize,
}

impl Default for LstmShape {
    fn default() -> Self {
        LstmShape {
            input_dim: EMBEDDING_DIM,
            hidden: HIDDEN_UNITS,
            max_seq_len: MAX_SEQ_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmClassifier {
    pub shape: LstmShape,
    pub seed: u64,
    /// `4 * hidden` rows by `input_dim + hidden` columns, row-major.
    pub gate_weights: Vec<f64>,
    pub gate_bias: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub out_bias: f64,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub gate_weights: Vec<f64>,
    pub gate_bias: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub out_bias: f64,
}

impl LstmGrads {
    fn zeros(m: &LstmClassifier) -> Self {
        LstmGrads {
            gate_weights: vec![0.0; m.gate_weights.len()],
            gate_bias: vec![0.0; m.gate_bias.len()],
            out_weights: vec![0.0; m.out_weights.len()],
            out_bias: 0.0,
        }
    }

    fn add(&mut self, o: &LstmGrads) {
        add_into(&mut self.gate_weights, &o.gate_weights);
        add_into(&mut self.gate_bias, &o.gate_bias);
        add_into(&mut self.out_weights, &o.out_weights);
        self.out_bias += o.out_bias;
    }

    fn scale(&mut self, k: f64) {
        self.gate_weights.iter_mut().for_each(|v| *v *= k);
        self.gate_bias.iter_mut().for_each(|v| *v *= k);
        self.out_weights.iter_mut().for_each(|v| *v *= k);
        self.out_bias *= k;
    }

    pub fn norm(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        (sq(&self.gate_weights)
            + sq(&self.gate_bias)
            + sq(&self.out_weights)
            + self.out_bias * self.out_bias)
            .sqrt()
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Activations of one unmasked time step.
#[derive(Debug, Clone)]
struct Step {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    steps: Vec<Step>,
    final_hidden: Vec<f64>,
    pub probability: f64,
}

impl ForwardCache {
    pub fn final_hidden(&self) -> &[f64] {
        &self.final_hidden
    }

    /// Number of unmasked steps processed.
    pub fn steps(&self) -> usize {
        self.steps.len()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Truncates to `max_len` tokens (keeping the head) and pre-pads with `None`.
pub fn pad_sequence<S: AsRef<str>>(tokens: &[S], max_len: usize) -> Vec<Option<&str>> {
    let kept = &tokens[..tokens.len().min(max_len)];
    let mut out = vec![None; max_len - kept.len()];
    out.extend(kept.iter().map(|t| Some(t.as_ref())));
    out
}

impl LstmClassifier {
    /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights, zero biases except the
    /// forget gate (1.0).
    pub fn new(shape: LstmShape, seed: u64) -> Self {
        let h = shape.hidden;
        let cols = shape.input_dim + h;
        let k = 1.0 / (h as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gate_weights = (0..4 * h * cols).map(|_| rng.gen_range(-k..k)).collect();
        let mut gate_bias = vec![0.0; 4 * h];
        gate_bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        let out_weights = (0..h).map(|_| rng.gen_range(-k..k)).collect();
        LstmClassifier {
            shape,
            seed,
            gate_weights,
            gate_bias,
            out_weights,
            out_bias: 0.0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.gate_weights.len() + self.gate_bias.len() + self.out_weights.len() + 1
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let h = self.shape.hidden;
        let cols = self.shape.input_dim + h;
        let ok = self.gate_weights.len() == 4 * h * cols
            && self.gate_bias.len() == 4 * h
            && self.out_weights.len() == h
            && h > 0
            && self.shape.max_seq_len > 0;
        if !ok {
            return Err(NeuralError::Shape(format!(
                "parameters do not match input_dim {} hidden {}",
                self.shape.input_dim, h
            )));
        }
        let finite = self
            .gate_weights
            .iter()
            .chain(&self.gate_bias)
            .chain(&self.out_weights)
            .all(|v| v.is_finite())
            && self.out_bias.is_finite();
        if !finite {
            return Err(NeuralError::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Runs over a padded sequence of input vectors; `None` steps are masked
    /// and leave the state untouched.
    pub fn forward_vectors(
        &self,
        inputs: &[Option<Vec<f64>>],
    ) -> Result<ForwardCache, NeuralError> {
        let h = self.shape.hidden;
        let d = self.shape.input_dim;
        let cols = d + h;
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut steps = Vec::new();
        for x in inputs.iter().flatten() {
            debug_assert_eq!(x.len(), d);
            let mut gates = self.gate_bias.clone();
            for (r, z) in gates.iter_mut().enumerate() {
                let row = &self.gate_weights[r * cols..(r + 1) * cols];
                let mut acc = 0.0;
                for (w, v) in row[..d].iter().zip(x) {
                    acc += w * v;
                }
                for (w, v) in row[d..].iter().zip(&h_prev) {
                    acc += w * v;
                }
                *z += acc;
            }
            for (r, z) in gates.iter_mut().enumerate() {
                *z = if r < 3 * h { sigmoid(*z) } else { z.tanh() };
            }
            let mut c = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for j in 0..h {
                let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                c[j] = f * c_prev[j] + i * g;
                tanh_c[j] = c[j].tanh();
                h_new[j] = o * tanh_c[j];
            }
            if h_new.iter().chain(&c).any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteActivation);
            }
            steps.push(Step {
                input: x.clone(),
                h_prev: std::mem::replace(&mut h_prev, h_new),
                c_prev: std::mem::replace(&mut c_prev, c),
                gates,
                tanh_c,
            });
        }
        let logit: f64 = self
            .out_weights
            .iter()
            .zip(&h_prev)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.out_bias;
        let probability = sigmoid(logit);
        if !probability.is_finite() {
            return Err(NeuralError::NonFiniteActivation);
        }
        Ok(ForwardCache {
            steps,
            final_hidden: h_prev,
            probability,
        })
    }

    /// Embeds, truncates and pads `tokens`, then runs the recurrence.
    pub fn forward<S: AsRef<str>>(
        &self,
        tokens: &[S],
        embeddings: &EmbeddingTable,
    ) -> Result<ForwardCache, NeuralError> {
        if embeddings.dim() != self.shape.input_dim {
            return Err(NeuralError::WrongDimension {
                expected: self.shape.input_dim,
                found: embeddings.dim(),
            });
        }
        let inputs: Vec<Option<Vec<f64>>> = pad_sequence(tokens, self.shape.max_seq_len)
            .into_iter()
            .map(|t| t.map(|w| embeddings.lookup(w)))
            .collect();
        self.forward_vectors(&inputs)
    }

    pub fn probability<S: AsRef<str>>(
        &self,
        tokens: &[S],
        embeddings: &EmbeddingTable,
    ) -> Result<f64, NeuralError> {
        Ok(self.forward(tokens, embeddings)?.probability)
    }

    /// Log odds of Suggestion; positive means Suggestion.
    pub fn decision_value<S: AsRef<str>>(
        &self,
        tokens: &[S],
        embeddings: &EmbeddingTable,
    ) -> Result<f64, NeuralError> {
        let cache = self.forward(tokens, embeddings)?;
        Ok(self
            .out_weights
            .iter()
            .zip(&cache.final_hidden)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.out_bias)
    }

    pub fn predict<S: AsRef<str>>(
        &self,
        tokens: &[S],
        embeddings: &EmbeddingTable,
    ) -> Result<Label, NeuralError> {
        self.decision_value(tokens, embeddings)
            .map(label_from_decision)
    }

    /// Gradient of the binary cross-entropy of one example by
    /// backpropagation through time.
    pub fn backward(&self, cache: &ForwardCache, label: Label) -> LstmGrads {
        let h = self.shape.hidden;
        let d = self.shape.input_dim;
        let cols = d + h;
        let mut g = LstmGrads::zeros(self);
        let y = if label.is_positive() { 1.0 } else { 0.0 };
        let d_logit = cache.probability - y;
        g.out_bias = d_logit;
        for j in 0..h {
            g.out_weights[j] = d_logit * cache.final_hidden[j];
        }
        let mut dh: Vec<f64> = self.out_weights.iter().map(|w| d_logit * w).collect();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for step in cache.steps.iter().rev() {
            let gates = &step.gates;
            for j in 0..h {
                let (i, f, o, gg) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = step.tanh_c[j];
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                let d_i = dc[j] * gg;
                let d_g = dc[j] * i;
                let d_f = dc[j] * step.c_prev[j];
                dz[j] = d_i * i * (1.0 - i);
                dz[h + j] = d_f * f * (1.0 - f);
                dz[2 * h + j] = d_o * o * (1.0 - o);
                dz[3 * h + j] = d_g * (1.0 - gg * gg);
                dc[j] *= f;
            }
            let mut dh_prev = vec![0.0; h];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                g.gate_bias[r] += dzr;
                let grow = &mut g.gate_weights[r * cols..(r + 1) * cols];
                for (gw, v) in grow[..d].iter_mut().zip(&step.input) {
                    *gw += dzr * v;
                }
                for (gw, v) in grow[d..].iter_mut().zip(&step.h_prev) {
                    *gw += dzr * v;
                }
                let wrow = &self.gate_weights[r * cols + d..(r + 1) * cols];
                for (dp, w) in dh_prev.iter_mut().zip(wrow) {
                    *dp += dzr * w;
                }
            }
            dh = dh_prev;
        }
        g
    }

    /// Binary cross-entropy of one example.
    pub fn loss(probability: f64, label: Label) -> f64 {
        let p = probability.clamp(1e-300, 1.0 - 1e-16);
        if label.is_positive() {
            -p.ln()
        } else {
            -(1.0 - p).ln()
        }
    }

    fn apply(&mut self, g: &LstmGrads, lr: f64) {
        self.gate_weights
            .iter_mut()
            .zip(&g.gate_weights)
            .for_each(|(w, d)| *w -= lr * d);
        self.gate_bias
            .iter_mut()
            .zip(&g.gate_bias)
            .for_each(|(w, d)| *w -= lr * d);
        self.out_weights
            .iter_mut()
            .zip(&g.out_weights)
            .for_each(|(w, d)| *w -= lr * d);
        self.out_bias -= lr * g.out_bias;
    }

    /// Flat view of all parameters, in gate-weight, gate-bias, out-weight,
    /// out-bias order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend(&self.gate_weights);
        p.extend(&self.gate_bias);
        p.extend(&self.out_weights);
        p.push(self.out_bias);
        p
    }

    pub fn set_parameter(&mut self, k: usize, value: f64) {
        let a = self.gate_weights.len();
        let b = a + self.gate_bias.len();
        let c = b + self.out_weights.len();
        match k {
            _ if k < a => self.gate_weights[k] = value,
            _ if k < b => self.gate_bias[k - a] = value,
            _ if k < c => self.out_weights[k - b] = value,
            _ => self.out_bias = value,
        }
    }
}

impl LstmGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend(&self.gate_weights);
        p.extend(&self.gate_bias);
        p.extend(&self.out_weights);
        p.push(self.out_bias);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmHyperparameters {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for LstmHyperparameters {
    fn default() -> Self {
        LstmHyperparameters {
            epochs: 10,
            learning_rate: 0.1,
            batch_size: 16,
            clip_norm: 5.0,
            seed: 42,
        }
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LstmTrainingLog {
    pub epoch_loss: Vec<f64>,
}

/// Plain minibatch SGD with global-norm gradient clipping. Embeddings stay
/// frozen; examples are reshuffled each epoch from `hp.seed`.
pub fn lstm_fit<S: AsRef<str>>(
    mut model: LstmClassifier,
    data: &[(Vec<S>, Label)],
    embeddings: &EmbeddingTable,
    hp: &LstmHyperparameters,
) -> Result<(LstmClassifier, LstmTrainingLog), NeuralError> {
    model.validate()?;
    if embeddings.dim() != model.shape.input_dim {
        return Err(NeuralError::WrongDimension {
            expected: model.shape.input_dim,
            found: embeddings.dim(),
        });
    }
    let mut log = LstmTrainingLog::default();
    if hp.epochs == 0 || data.is_empty() {
        return Ok((model, log));
    }
    // embed once; embeddings are frozen
    let inputs: Vec<Vec<Option<Vec<f64>>>> = data
        .iter()
        .map(|(toks, _)| {
            pad_sequence(toks, model.shape.max_seq_len)
                .into_iter()
                .map(|t| t.map(|w| embeddings.lookup(w)))
                .collect()
        })
        .collect();
    let batch = hp.batch_size.max(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let mut grads = LstmGrads::zeros(&model);
            for &i in chunk {
                let cache = model
                    .forward_vectors(&inputs[i])
                    .map_err(|_| NeuralError::Diverged { epoch: epoch + 1 })?;
                total += LstmClassifier::loss(cache.probability, data[i].1);
                grads.add(&model.backward(&cache, data[i].1));
            }
            grads.scale(1.0 / chunk.len() as f64);
            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(NeuralError::Diverged { epoch: epoch + 1 });
            }
            if norm > hp.clip_norm {
                grads.scale(hp.clip_norm / norm);
            }
            model.apply(&grads, hp.learning_rate);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(NeuralError::Diverged { epoch: epoch + 1 });
        }
        log.epoch_loss.push(mean);
    }
    Ok((model, log))
}
