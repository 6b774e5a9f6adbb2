//! Recurrent sentence classifier over pretrained word vectors.

mod embeddings;
mod lstm;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub use embeddings::{
    load_embeddings, read_embeddings, EmbeddingTable, LoadOptions, LoadStats, EMBEDDING_DIM,
};
pub use lstm::{
    lstm_fit, pad_sequence, ForwardCache, LstmClassifier, LstmGrads, LstmHyperparameters,
    LstmShape, LstmTrainingLog, HIDDEN_UNITS, MAX_SEQ_LEN,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed embedding header {0:?}; expected \"<vocab_count> <dim>\"")]
    MalformedHeader(String),
    #[error("embedding dimension {found}, expected {expected}")]
    WrongDimension { expected: usize, found: usize },
    #[error("line {line}: expected {expected} components, found {found}")]
    ComponentCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a number")]
    BadValue { line: usize, value: String },
    #[error("line {line}: non-finite vector component")]
    NonFinite { line: usize },
    #[error("line {line}: header declares {count} vectors but the file ends after {found}")]
    MissingLines {
        line: usize,
        count: usize,
        found: usize,
    },
    #[error("line {line}: more vectors than the {count} declared in the header")]
    ExtraLine { line: usize, count: usize },
    #[error("invalid model shape: {0}")]
    Shape(String),
    #[error("diverged model: non-finite activation")]
    NonFiniteActivation,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Settings of the transfer-learning system reported alongside the
/// classical models. Documentation only; nothing here is trainable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UlmfitReference {
    pub bptt: usize,
    pub batch_size: usize,
    pub embedding_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub f1_train: f64,
    pub f1_test: f64,
}

pub const ULMFIT_REFERENCE: UlmfitReference = UlmfitReference {
    bptt: 70,
    batch_size: 48,
    embedding_size: 400,
    hidden_size: 1150,
    layers: 3,
    f1_train: 0.861,
    f1_test: 0.701,
};
