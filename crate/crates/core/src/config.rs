//! Run configuration: a versioned TOML file, overridden by command-line
//! flags. Relative paths in the file resolve against the file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::DEFAULT_KEYWORDS;
use crate::features::{VectorizerConfig, Weighting};
use crate::linear::Hyperparameters;
use crate::model::{ModelKind, TrainSettings};
use crate::neural::{LstmHyperparameters, LstmShape};
use crate::normalize::{
    load_emoticons, load_rules, load_slang, LowercasePolicy, NormalizeError, Normalizer,
    NormalizerConfig, Rule,
};

pub const CONFIG_VERSION: u32 = 1;
pub const CONFIG_ENV: &str = "SUGMINE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: config version {found} is not supported (expected {CONFIG_VERSION})")]
    Version { path: PathBuf, found: u32 },
    #[error("{path}: missing required \"version\" field")]
    MissingVersion { path: PathBuf },
    #[error("{what} path does not exist: {path}")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub trial: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub slang: Option<PathBuf>,
    pub emoticons: Option<PathBuf>,
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizerSection {
    pub lowercase_policy: LowercasePolicy,
    pub disabled_rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub weighting: Option<Weighting>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::Nb,
            weighting: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub keywords: Vec<String>,
    pub exemplars: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            exemplars: 10,
        }
    }
}

/// Everything a subcommand may need. Field defaults apply to anything the
/// file leaves out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub model: ModelSection,
    pub hyperparameters: Hyperparameters,
    pub vectorizer: VectorizerConfig,
    pub lstm: LstmHyperparameters,
    pub lstm_shape: LstmShape,
    pub normalizer: NormalizerSection,
    pub analysis: AnalysisSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: crate::corpus::DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            paths: Paths::default(),
            model: ModelSection::default(),
            hyperparameters: Hyperparameters::default(),
            vectorizer: VectorizerConfig::default(),
            lstm: LstmHyperparameters::default(),
            lstm_shape: LstmShape::default(),
            normalizer: NormalizerSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        match value.get("version") {
            None => {
                return Err(ConfigError::MissingVersion {
                    path: origin.to_path_buf(),
                })
            }
            Some(v) if v.as_integer() != Some(i64::from(CONFIG_VERSION)) => {
                return Err(ConfigError::Version {
                    path: origin.to_path_buf(),
                    found: v.as_integer().unwrap_or(-1).try_into().unwrap_or(u32::MAX),
                })
            }
            _ => {}
        }
        let mut cfg: RunConfig =
            value
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Parse {
                    path: origin.to_path_buf(),
                    message: e.message().to_string(),
                })?;
        let base = origin.parent().unwrap_or(Path::new(""));
        cfg.resolve_relative(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let p = &mut self.paths;
        for slot in [
            &mut p.train,
            &mut p.trial,
            &mut p.test,
            &mut p.embeddings,
            &mut p.slang,
            &mut p.emoticons,
            &mut p.rules,
        ] {
            if let Some(path) = slot.as_mut() {
                fix(path);
            }
        }
    }

    /// Setting sanity checks that need no file access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let hp = &self.hyperparameters;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(hp.alpha > 0.0 && hp.alpha.is_finite()) {
            return bad(format!(
                "hyperparameters.alpha must be positive, got {}",
                hp.alpha
            ));
        }
        if !(hp.l2 >= 0.0 && hp.l2.is_finite()) {
            return bad(format!(
                "hyperparameters.l2 must be non-negative, got {}",
                hp.l2
            ));
        }
        if !(hp.learning_rate > 0.0 && hp.learning_rate.is_finite()) {
            return bad(format!(
                "hyperparameters.learning_rate must be positive, got {}",
                hp.learning_rate
            ));
        }
        if !(hp.decay >= 0.0 && hp.decay.is_finite()) {
            return bad(format!(
                "hyperparameters.decay must be non-negative, got {}",
                hp.decay
            ));
        }
        if hp.epochs == 0 || self.lstm.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.vectorizer.min_df == 0 {
            return bad("vectorizer.min_df must be at least 1".into());
        }
        if !(1..=2).contains(&self.vectorizer.ngram_max) {
            return bad(format!(
                "vectorizer.ngram_max must be 1 or 2, got {}",
                self.vectorizer.ngram_max
            ));
        }
        if self.lstm.batch_size == 0
            || self.lstm_shape.hidden == 0
            || self.lstm_shape.max_seq_len == 0
        {
            return bad("lstm batch_size, hidden and max_seq_len must be at least 1".into());
        }
        if !(self.lstm.learning_rate > 0.0 && self.lstm.clip_norm > 0.0) {
            return bad("lstm learning_rate and clip_norm must be positive".into());
        }
        Ok(())
    }

    /// Builds the normalizer, loading any lexicon overrides.
    pub fn normalizer(&self) -> Result<Normalizer, ConfigError> {
        let mut cfg = NormalizerConfig::default();
        if let Some(p) = &self.paths.slang {
            cfg.slang_lexicon = load_slang(require(p, "slang lexicon")?)?;
        }
        if let Some(p) = &self.paths.emoticons {
            cfg.emoticon_lexicon = load_emoticons(require(p, "emoticon lexicon")?)?;
        }
        if let Some(p) = &self.paths.rules {
            cfg.pattern_rules = load_rules(require(p, "rule table")?)?;
        }
        cfg.lowercase_policy = self.normalizer.lowercase_policy;
        let disabled: BTreeSet<Rule> = self.normalizer.disabled_rules.iter().copied().collect();
        cfg.enabled_rules.retain(|r| !disabled.contains(r));
        Ok(Normalizer::new(cfg)?)
    }

    pub fn train_settings(&self) -> TrainSettings {
        let mut s = TrainSettings::new(self.model.kind);
        s.hyperparameters = self.hyperparameters;
        s.vectorizer = self.vectorizer;
        s.weighting = self.model.weighting;
        s.lstm = self.lstm;
        s.lstm_shape = self.lstm_shape;
        s.with_seed(self.seed)
    }
}

/// Returns `path` if it exists, else a [`ConfigError::MissingPath`].
pub fn require<'a>(path: &'a Path, what: &'static str) -> Result<&'a Path, ConfigError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(ConfigError::MissingPath {
            what,
            path: path.to_path_buf(),
        })
    }
}
