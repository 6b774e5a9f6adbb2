//! Training entry points and the persisted model format.
//!
//! A model is a JSON file plus a companion feature file next to it: the
//! fitted vocabulary for the sparse models, or the word vectors seen in
//! training for the LSTM. Both the normalizer and the feature state are
//! fingerprinted; loading and prediction refuse mismatches.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Label};
use crate::eval::Prediction;
use crate::features::{FeatureError, SparseVector, VectorizerConfig, Vocabulary, Weighting};
use crate::linear::{
    label_from_decision, logistic_fit, nb_fit, svm_fit, Classifier, Hyperparameters, LinearModel,
    ModelError, NBModel,
};
use crate::neural::{
    lstm_fit, read_embeddings, EmbeddingTable, LoadOptions, LstmClassifier, LstmHyperparameters,
    LstmShape, NeuralError,
};
use crate::normalize::Normalizer;

pub const MODEL_FORMAT: &str = "sugmine-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a model file: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: model format version {found} is not supported (expected {MODEL_VERSION})")]
    Version { path: PathBuf, found: u32 },
    #[error(
        "{what} fingerprint mismatch: model was built with {expected}, found {found}; \
         the model was trained with different preprocessing"
    )]
    Fingerprint {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("no {0} examples in the training data")]
    ClassAbsent(Label),
    #[error("the lstm model needs word embeddings")]
    MissingEmbeddings,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Nb,
    Logreg,
    Svm,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Nb,
        ModelKind::Logreg,
        ModelKind::Svm,
        ModelKind::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Lstm => "lstm",
        }
    }

    /// Count vectors for NB and LR, TF-IDF for the SVM.
    pub fn default_weighting(self) -> Weighting {
        match self {
            ModelKind::Svm => Weighting::Tfidf,
            _ => Weighting::Count,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown model kind {s:?}; expected one of nb, logreg, svm, lstm")
            })
    }
}

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub vectorizer: VectorizerConfig,
    /// `None` picks the kind's default.
    pub weighting: Option<Weighting>,
    pub lstm: LstmHyperparameters,
    pub lstm_shape: LstmShape,
}

impl TrainSettings {
    pub fn new(kind: ModelKind) -> Self {
        TrainSettings {
            kind,
            hyperparameters: Hyperparameters::default(),
            vectorizer: VectorizerConfig::default(),
            weighting: None,
            lstm: LstmHyperparameters::default(),
            lstm_shape: LstmShape::default(),
        }
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting.unwrap_or(self.kind.default_weighting())
    }

    /// "count", "tfidf" or "embeddings".
    pub fn feature_name(&self) -> &'static str {
        match (self.kind, self.weighting()) {
            (ModelKind::Lstm, _) => "embeddings",
            (_, Weighting::Count) => "count",
            (_, Weighting::Tfidf) => "tfidf",
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hyperparameters.seed = seed;
        self.lstm.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Nb(NBModel),
    Logreg(LinearModel),
    Svm(LinearModel),
    Lstm(LstmClassifier),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Nb(_) => ModelKind::Nb,
            ModelParams::Logreg(_) => ModelKind::Logreg,
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Lstm(_) => ModelKind::Lstm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub settings: TrainSettings,
    pub normalizer_fingerprint: String,
    /// Vocabulary or embeddings fingerprint.
    pub features_fingerprint: String,
    /// Companion file name, relative to the model file's directory.
    pub features_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    header: ModelHeader,
    model: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureState {
    Sparse(Vocabulary),
    Embedded(EmbeddingTable),
}

impl FeatureState {
    pub fn fingerprint(&self) -> String {
        match self {
            FeatureState::Sparse(v) => v.fingerprint(),
            FeatureState::Embedded(e) => e.fingerprint(),
        }
    }

    fn to_text(&self) -> String {
        match self {
            FeatureState::Sparse(v) => v.to_text(),
            FeatureState::Embedded(e) => e.to_text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub header: ModelHeader,
    pub params: ModelParams,
    pub features: FeatureState,
}

/// Per-epoch objective values; empty for naive Bayes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub initial_loss: Option<f64>,
    pub epoch_loss: Vec<f64>,
}

/// Normalizes every record and returns its token list.
pub fn tokenize_dataset(normalizer: &Normalizer, d: &Dataset) -> Vec<Vec<String>> {
    d.records
        .iter()
        .map(|r| normalizer.preprocess_tokens(&r.text))
        .collect()
}

/// Fits a model on `train`. Record texts go through `normalizer` first, so
/// raw and already-normalized files give the same result.
pub fn train(
    train: &Dataset,
    normalizer: &Normalizer,
    settings: &TrainSettings,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(TrainedModel, TrainingReport), ModelFileError> {
    let dist = train.distribution();
    for label in [Label::Suggestion, Label::NonSuggestion] {
        if dist.get(label) == 0 {
            return Err(ModelFileError::ClassAbsent(label));
        }
    }
    let docs = tokenize_dataset(normalizer, train);
    let labels = train.labels();
    let (params, features, report) = match settings.kind {
        ModelKind::Lstm => {
            let table = embeddings.ok_or(ModelFileError::MissingEmbeddings)?;
            let bundled = table.subset(docs.iter().flatten().map(String::as_str));
            let shape = LstmShape {
                input_dim: table.dim(),
                ..settings.lstm_shape
            };
            let init = LstmClassifier::new(shape, settings.lstm.seed);
            let data: Vec<(Vec<String>, Label)> = docs.into_iter().zip(labels).collect();
            let (m, log) = lstm_fit(init, &data, &bundled, &settings.lstm)?;
            let report = TrainingReport {
                initial_loss: None,
                epoch_loss: log.epoch_loss,
            };
            (
                ModelParams::Lstm(m),
                FeatureState::Embedded(bundled),
                report,
            )
        }
        kind => {
            let vocab = Vocabulary::fit(&docs, settings.vectorizer)?;
            let w = settings.weighting();
            let x: Vec<SparseVector> = docs.iter().map(|d| vocab.vectorize(d, w)).collect();
            let hp = &settings.hyperparameters;
            let (params, report) = match kind {
                ModelKind::Nb => (
                    ModelParams::Nb(nb_fit(&x, &labels, vocab.len(), hp.alpha)?),
                    TrainingReport::default(),
                ),
                ModelKind::Logreg => {
                    let (m, log) = logistic_fit(&x, &labels, vocab.len(), hp)?;
                    (ModelParams::Logreg(m), sgd_report(log))
                }
                _ => {
                    let (m, log) = svm_fit(&x, &labels, vocab.len(), hp)?;
                    (ModelParams::Svm(m), sgd_report(log))
                }
            };
            (params, FeatureState::Sparse(vocab), report)
        }
    };
    let header = ModelHeader {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        settings: settings.clone(),
        normalizer_fingerprint: normalizer.fingerprint().to_string(),
        features_fingerprint: features.fingerprint(),
        features_file: String::new(),
    };
    Ok((
        TrainedModel {
            header,
            params,
            features,
        },
        report,
    ))
}

fn sgd_report(log: crate::linear::TrainingLog) -> TrainingReport {
    TrainingReport {
        initial_loss: Some(log.initial_loss),
        epoch_loss: log.epoch_loss,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelFileError + '_ {
    move |source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Companion file path: `model.json` pairs with `model.vocab` or
/// `model.vectors`.
pub fn features_path(model_path: &Path, kind: ModelKind) -> PathBuf {
    model_path.with_extension(match kind {
        ModelKind::Lstm => "vectors",
        _ => "vocab",
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    /// Serialized model JSON and companion feature text, as written by
    /// [`TrainedModel::save`].
    pub fn to_files(&self, model_path: &Path) -> (String, PathBuf, String) {
        let fpath = features_path(model_path, self.kind());
        let mut header = self.header.clone();
        header.features_file = fpath
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = ModelFile {
            header,
            model: self.params.clone(),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("model serializes");
        json.push('\n');
        (json, fpath, self.features.to_text())
    }

    pub fn save(&self, model_path: &Path) -> Result<PathBuf, ModelFileError> {
        let (json, fpath, ftext) = self.to_files(model_path);
        std::fs::write(&fpath, ftext).map_err(io_err(&fpath))?;
        std::fs::write(model_path, json).map_err(io_err(model_path))?;
        Ok(fpath)
    }

    pub fn load(model_path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(model_path).map_err(io_err(model_path))?;
        let format_err = |message: String| ModelFileError::Format {
            path: model_path.to_path_buf(),
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(format_err(format!(
                "missing \"format\": \"{MODEL_FORMAT}\""
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != u64::from(MODEL_VERSION) {
            return Err(ModelFileError::Version {
                path: model_path.to_path_buf(),
                found: version as u32,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| format_err(e.to_string()))?;
        let header = file.header;
        if file.model.kind() != header.settings.kind {
            return Err(format_err("parameter kind disagrees with settings".into()));
        }
        let dir = model_path.parent().unwrap_or(Path::new("."));
        let fpath = dir.join(&header.features_file);
        let ftext = std::fs::read_to_string(&fpath).map_err(io_err(&fpath))?;
        let features = match &file.model {
            ModelParams::Lstm(m) => {
                m.validate()?;
                let (t, _) = read_embeddings(
                    ftext.as_bytes(),
                    &LoadOptions {
                        dim: Some(m.shape.input_dim),
                        keep: None,
                    },
                )?;
                FeatureState::Embedded(t)
            }
            _ => FeatureState::Sparse(Vocabulary::from_text(&ftext)?),
        };
        let found = features.fingerprint();
        if found != header.features_fingerprint {
            return Err(ModelFileError::Fingerprint {
                what: "feature",
                expected: header.features_fingerprint,
                found,
            });
        }
        let dim_ok = match (&file.model, &features) {
            (ModelParams::Nb(m), FeatureState::Sparse(v)) => m.dim() == v.len(),
            (ModelParams::Logreg(m) | ModelParams::Svm(m), FeatureState::Sparse(v)) => {
                m.dim() == v.len()
            }
            (ModelParams::Lstm(_), FeatureState::Embedded(_)) => true,
            _ => false,
        };
        if !dim_ok {
            return Err(format_err(
                "model dimension disagrees with its features".into(),
            ));
        }
        Ok(TrainedModel {
            header,
            params: file.model,
            features,
        })
    }

    /// Errors unless `normalizer` is the one the model was trained with.
    pub fn check_normalizer(&self, normalizer: &Normalizer) -> Result<(), ModelFileError> {
        if normalizer.fingerprint() != self.header.normalizer_fingerprint {
            return Err(ModelFileError::Fingerprint {
                what: "normalizer",
                expected: self.header.normalizer_fingerprint.clone(),
                found: normalizer.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    /// Decision value for normalized tokens; positive means Suggestion.
    pub fn decision_value<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64, ModelFileError> {
        match (&self.params, &self.features) {
            (ModelParams::Lstm(m), FeatureState::Embedded(t)) => Ok(m.decision_value(tokens, t)?),
            (params, FeatureState::Sparse(v)) => {
                let x = v.vectorize(tokens, self.header.settings.weighting());
                Ok(match params {
                    ModelParams::Nb(m) => m.decision_value(&x)?,
                    ModelParams::Logreg(m) | ModelParams::Svm(m) => m.decision_value(&x)?,
                    ModelParams::Lstm(_) => unreachable!("lstm pairs with embeddings"),
                })
            }
            _ => unreachable!("feature state matches the model kind"),
        }
    }

    /// Normalizes `text` with `normalizer` (checked against the model) and
    /// classifies it.
    pub fn predict_text(
        &self,
        normalizer: &Normalizer,
        text: &str,
    ) -> Result<Prediction, ModelFileError> {
        self.check_normalizer(normalizer)?;
        let score = self.decision_value(&normalizer.preprocess_tokens(text))?;
        Ok(Prediction::scored("", label_from_decision(score), score))
    }

    pub fn predict_dataset(
        &self,
        normalizer: &Normalizer,
        d: &Dataset,
    ) -> Result<Vec<Prediction>, ModelFileError> {
        self.check_normalizer(normalizer)?;
        d.records
            .iter()
            .map(|r| {
                let score = self.decision_value(&normalizer.preprocess_tokens(&r.text))?;
                Ok(Prediction::scored(
                    r.id.clone(),
                    label_from_decision(score),
                    score,
                ))
            })
            .collect()
    }
}
