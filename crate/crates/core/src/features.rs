//! Vocabularies and sparse count / TF-IDF vectors over normalized tokens.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::sha256_hex;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("min_df must be at least 1, got {0}")]
    InvalidMinDf(usize),
    #[error("ngram_max must be 1 or 2, got {0}")]
    InvalidNgram(usize),
    #[error("vocabulary file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizerConfig {
    pub min_df: usize,
    /// 1 for unigrams, 2 for unigrams plus bigrams.
    pub ngram_max: usize,
    pub lowercase: bool,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            min_df: 1,
            ngram_max: 1,
            lowercase: true,
        }
    }
}

impl VectorizerConfig {
    fn validate(&self) -> Result<(), FeatureError> {
        if self.min_df < 1 {
            return Err(FeatureError::InvalidMinDf(self.min_df));
        }
        if !(1..=2).contains(&self.ngram_max) {
            return Err(FeatureError::InvalidNgram(self.ngram_max));
        }
        Ok(())
    }

    /// The feature terms a token list contributes, in order, with repeats.
    pub fn terms<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        let unigrams: Vec<String> = tokens
            .iter()
            .map(|t| {
                if self.lowercase {
                    t.as_ref().to_lowercase()
                } else {
                    t.as_ref().to_string()
                }
            })
            .collect();
        if self.ngram_max < 2 {
            return unigrams;
        }
        let bigrams: Vec<String> = unigrams
            .windows(2)
            .map(|w| format!("{} {}", w[0], w[1]))
            .collect();
        let mut all = unigrams;
        all.extend(bigrams);
        all
    }
}

/// Sorted sparse vector; indices strictly increasing, no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector::default()
    }

    /// Builds from unsorted `(index, weight)` pairs, summing duplicates and
    /// dropping zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *acc.entry(i).or_insert(0.0) += w;
        }
        SparseVector {
            entries: acc.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(i, w)| (i as usize, w))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One past the largest stored index, 0 when empty.
    pub fn min_dim(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i as usize + 1)
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, w)| w * dense[i as usize])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    pub fn scaled(&self, k: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(i, w)| (i, w * k)))
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for &(i, w) in &self.entries {
            d[i as usize] = w;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    document_frequency: Vec<u32>,
    n_documents: usize,
    config: VectorizerConfig,
}

impl Vocabulary {
    /// Fits over tokenized documents. Term indices follow lexicographic term
    /// order.
    pub fn fit<S: AsRef<str>>(
        corpus: &[Vec<S>],
        config: VectorizerConfig,
    ) -> Result<Self, FeatureError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, u32> = BTreeMap::new();
        for doc in corpus {
            let mut terms = config.terms(doc);
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let kept: Vec<(String, u32)> = df
            .into_iter()
            .filter(|(_, d)| *d as usize >= config.min_df)
            .collect();
        Ok(Self::from_parts(kept, corpus.len(), config))
    }

    fn from_parts(kept: Vec<(String, u32)>, n_documents: usize, config: VectorizerConfig) -> Self {
        let index = kept
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let (terms, document_frequency) = kept.into_iter().unzip();
        Vocabulary {
            terms,
            index,
            document_frequency,
            n_documents,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn config(&self) -> VectorizerConfig {
        self.config
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, index: u32) -> u32 {
        self.document_frequency[index as usize]
    }

    /// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, index: u32) -> f64 {
        let n = self.n_documents as f64;
        let df = self.document_frequency[index as usize] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub fn count_vector<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        SparseVector::from_pairs(
            self.config
                .terms(tokens)
                .iter()
                .filter_map(|t| self.index_of(t))
                .map(|i| (i, 1.0)),
        )
    }

    /// Counts times idf, scaled to unit L2 norm when non-zero.
    pub fn tfidf_vector<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let counts = self.count_vector(tokens);
        let weighted = SparseVector::from_pairs(
            counts
                .iter()
                .map(|(i, c)| (i as u32, c * self.idf(i as u32))),
        );
        let norm = weighted.norm();
        if norm == 0.0 {
            return weighted;
        }
        SparseVector {
            entries: weighted
                .entries
                .iter()
                .map(|&(i, w)| (i, w / norm))
                .collect(),
        }
    }

    /// Plain-text form: a version header, settings, then `term<TAB>index<TAB>df`
    /// per line. Tabs, newlines and backslashes in terms are escaped.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("#@sugmine-vocabulary v1\n");
        s.push_str(&format!("n_documents\t{}\n", self.n_documents));
        s.push_str(&format!("min_df\t{}\n", self.config.min_df));
        s.push_str(&format!("ngram_max\t{}\n", self.config.ngram_max));
        s.push_str(&format!("lowercase\t{}\n", self.config.lowercase));
        s.push_str(&format!("terms\t{}\n", self.terms.len()));
        for (i, (t, df)) in self.terms.iter().zip(&self.document_frequency).enumerate() {
            s.push_str(&format!("{}\t{}\t{}\n", escape(t), i, df));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let err = |line: usize, message: String| FeatureError::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "#@sugmine-vocabulary v1")) => {}
            other => {
                return Err(err(
                    1,
                    format!("expected vocabulary header, found {:?}", other.map(|o| o.1)),
                ))
            }
        }
        let mut setting = |key: &str| -> Result<(usize, String), FeatureError> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing {key} line")))?;
            let value = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('\t'))
                .ok_or_else(|| err(n, format!("expected {key}")))?;
            Ok((n, value.to_string()))
        };
        let parse_num = |(n, v): (usize, String)| -> Result<usize, FeatureError> {
            v.parse().map_err(|_| err(n, format!("bad number {v:?}")))
        };
        let n_documents = parse_num(setting("n_documents")?)?;
        let min_df = parse_num(setting("min_df")?)?;
        let ngram_max = parse_num(setting("ngram_max")?)?;
        let (ln, lc) = setting("lowercase")?;
        let lowercase = lc
            .parse::<bool>()
            .map_err(|_| err(ln, format!("bad bool {lc:?}")))?;
        let n_terms = parse_num(setting("terms")?)?;
        let config = VectorizerConfig {
            min_df,
            ngram_max,
            lowercase,
        };
        let mut kept: Vec<(String, u32)> = Vec::with_capacity(n_terms);
        for (n, l) in lines {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(n, format!("expected 3 columns, found {}", cols.len())));
            }
            let idx: usize = cols[1].parse().map_err(|_| err(n, "bad index".into()))?;
            if idx != kept.len() {
                return Err(err(n, format!("index {idx} out of sequence")));
            }
            let df: u32 = cols[2].parse().map_err(|_| err(n, "bad df".into()))?;
            if df == 0 || df as usize > n_documents {
                return Err(err(n, format!("df {df} outside 1..={n_documents}")));
            }
            let term = unescape(cols[0]).ok_or_else(|| err(n, "bad escape".into()))?;
            if let Some((prev, _)) = kept.last() {
                if *prev >= term {
                    return Err(err(n, "terms not in sorted order".into()));
                }
            }
            kept.push((term, df));
        }
        if kept.len() != n_terms {
            return Err(err(
                0,
                format!("expected {n_terms} terms, found {}", kept.len()),
            ));
        }
        Ok(Self::from_parts(kept, n_documents, config))
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_text()).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

fn escape(t: &str) -> String {
    let mut s = String::with_capacity(t.len());
    for c in t.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            c => s.push(c),
        }
    }
    s
}

fn unescape(t: &str) -> Option<String> {
    let mut s = String::with_capacity(t.len());
    let mut chars = t.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            s.push(c);
            continue;
        }
        s.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(s)
}

/// Fits with unigram defaults and the given `min_df`.
pub fn fit_vocabulary<S: AsRef<str>>(
    corpus: &[Vec<S>],
    min_df: usize,
) -> Result<Vocabulary, FeatureError> {
    Vocabulary::fit(
        corpus,
        VectorizerConfig {
            min_df,
            ..Default::default()
        },
    )
}

pub fn count_vector<S: AsRef<str>>(tokens: &[S], v: &Vocabulary) -> SparseVector {
    v.count_vector(tokens)
}

pub fn tfidf_vector<S: AsRef<str>>(tokens: &[S], v: &Vocabulary) -> SparseVector {
    v.tfidf_vector(tokens)
}

/// Which weighting a model expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Count,
    Tfidf,
}

impl Vocabulary {
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S], weighting: Weighting) -> SparseVector {
        match weighting {
            Weighting::Count => self.count_vector(tokens),
            Weighting::Tfidf => self.tfidf_vector(tokens),
        }
    }
}
