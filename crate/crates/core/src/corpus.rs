//! Labeled sentence datasets: loading, saving, class counts and minority
//! oversampling.
//!
//! Files are delimiter-separated UTF-8 with the columns `id, sentence, label`
//! and an optional header row. Fields may be quoted with `"`; embedded quotes
//! are doubled (`""`). Labels are `1` for a suggestion and `0` otherwise.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Suffix appended to the id of a duplicated positive record.
pub const DUP_SUFFIX: &str = "-dup";

/// Seed used for the post-oversampling shuffle when none is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: file not found")]
    MissingFile { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file is not valid UTF-8 (first bad byte at offset {offset})")]
    Undecodable { path: PathBuf, offset: usize },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: expected 3 columns, found {found}")]
    ColumnCount { row: usize, found: usize },
    #[error("row {row}: sentence is empty")]
    EmptyText { row: usize },
    #[error("no positive instances: oversampling is undefined")]
    NoPositives,
    #[error("refusing to oversample a {0} split; only training data is rebalanced")]
    EvaluationSplit(SplitTag),
    #[error("duplicate id {0:?}")]
    DuplicateRecordId(String),
    #[error("empty sentence for id {0:?}")]
    EmptyRecordText(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonSuggestion,
    Suggestion,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Suggestion
    }

    /// The on-disk label digit.
    pub fn as_digit(self) -> char {
        match self {
            Label::Suggestion => '1',
            Label::NonSuggestion => '0',
        }
    }

    pub fn from_digit(s: &str) -> Option<Self> {
        match s.trim() {
            "1" => Some(Label::Suggestion),
            "0" => Some(Label::NonSuggestion),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Suggestion => "suggestion",
            Label::NonSuggestion => "non_suggestion",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Trial,
    Test,
    Other,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Trial => "trial",
            SplitTag::Test => "test",
            SplitTag::Other => "other",
        })
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "trial" => Ok(SplitTag::Trial),
            "test" => Ok(SplitTag::Test),
            "other" => Ok(SplitTag::Other),
            _ => Err(format!("unknown split tag {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub text: String,
    pub label: Label,
}

impl LabeledSentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        LabeledSentence {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

/// Class counts with both labels always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub suggestion: usize,
    pub non_suggestion: usize,
}

impl Distribution {
    pub fn total(&self) -> usize {
        self.suggestion + self.non_suggestion
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Suggestion => self.suggestion,
            Label::NonSuggestion => self.non_suggestion,
        }
    }

    pub fn as_map(&self) -> BTreeMap<Label, usize> {
        BTreeMap::from([
            (Label::Suggestion, self.suggestion),
            (Label::NonSuggestion, self.non_suggestion),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<LabeledSentence>,
    pub split: SplitTag,
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness and non-empty text.
    pub fn new(records: Vec<LabeledSentence>, split: SplitTag) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.text.trim().is_empty() {
                return Err(CorpusError::EmptyRecordText(r.id.clone()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateRecordId(r.id.clone()));
            }
        }
        Ok(Dataset { records, split })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn distribution(&self) -> Distribution {
        class_distribution(self)
    }

    /// Returns a copy with every sentence passed through `f`; ids and labels
    /// are kept.
    pub fn map_text<F: FnMut(&str) -> String>(&self, mut f: F) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .map(|r| LabeledSentence::new(r.id.clone(), f(&r.text), r.label))
                .collect(),
            split: self.split,
        }
    }
}

/// How a dataset file is laid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFormat {
    pub delimiter: u8,
    pub header: HeaderPolicy,
    pub split: SplitTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderPolicy {
    /// First row is a header iff its label column is not a 0/1 digit.
    Auto,
    Present,
    Absent,
}

impl Default for DatasetFormat {
    fn default() -> Self {
        DatasetFormat {
            delimiter: b',',
            header: HeaderPolicy::Auto,
            split: SplitTag::Other,
        }
    }
}

impl DatasetFormat {
    pub fn with_split(split: SplitTag) -> Self {
        DatasetFormat {
            split,
            ..Default::default()
        }
    }

    /// Comma for `.csv`, tab for `.tsv`/`.tab`, comma otherwise.
    pub fn for_path(path: &Path, split: SplitTag) -> Self {
        let delimiter = match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => b'\t',
            _ => b',',
        };
        DatasetFormat {
            delimiter,
            header: HeaderPolicy::Auto,
            split,
        }
    }
}

pub fn load_dataset(path: &Path, format: &DatasetFormat) -> Result<Dataset, CorpusError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile {
            path: path.to_path_buf(),
        },
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Undecodable {
        path: path.to_path_buf(),
        offset: e.valid_up_to(),
    })?;
    parse_dataset(text, format)
}

/// Parses dataset text. Row numbers in errors are 1-based physical records,
/// counting the header when there is one.
pub fn parse_dataset(text: &str, format: &DatasetFormat) -> Result<Dataset, CorpusError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CorpusError::Malformed {
            row: row_no,
            message: e.to_string(),
        })?;
        if row.len() == 1 && row.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if i == 0 {
            let is_header = match format.header {
                HeaderPolicy::Present => true,
                HeaderPolicy::Absent => false,
                HeaderPolicy::Auto => row.len() == 3 && Label::from_digit(&row[2]).is_none(),
            };
            if is_header {
                continue;
            }
        }
        if row.len() != 3 {
            return Err(CorpusError::ColumnCount {
                row: row_no,
                found: row.len(),
            });
        }
        let id = row[0].trim().to_string();
        let sentence = row[1].to_string();
        let label = Label::from_digit(&row[2]).ok_or_else(|| CorpusError::BadLabel {
            row: row_no,
            value: row[2].to_string(),
        })?;
        if sentence.trim().is_empty() {
            return Err(CorpusError::EmptyText { row: row_no });
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { row: row_no, id });
        }
        records.push(LabeledSentence::new(id, sentence, label));
    }
    Ok(Dataset {
        records,
        split: format.split,
    })
}

/// Serializes with a header row, quoting only where needed.
pub fn write_dataset(d: &Dataset, delimiter: u8) -> Result<String, CorpusError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    w.write_record(["id", "sentence", "label"])?;
    for r in &d.records {
        let label = r.label.as_digit().to_string();
        w.write_record([r.id.as_str(), r.text.as_str(), label.as_str()])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CorpusError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}

pub fn save_dataset(d: &Dataset, path: &Path, delimiter: u8) -> Result<(), CorpusError> {
    let body = write_dataset(d, delimiter)?;
    fs::write(path, body).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn class_distribution(d: &Dataset) -> Distribution {
    let suggestion = d.records.iter().filter(|r| r.label.is_positive()).count();
    Distribution {
        suggestion,
        non_suggestion: d.records.len() - suggestion,
    }
}

/// Doubles every positive record, then shuffles the whole set with `seed`.
///
/// Each duplicate carries the original id plus [`DUP_SUFFIX`] (repeated if that
/// id is already taken). Trial and test splits are rejected.
pub fn oversample(d: &Dataset, seed: u64) -> Result<Dataset, CorpusError> {
    if matches!(d.split, SplitTag::Trial | SplitTag::Test) {
        return Err(CorpusError::EvaluationSplit(d.split));
    }
    let positives = d.records.iter().filter(|r| r.label.is_positive()).count();
    if positives == 0 {
        return Err(CorpusError::NoPositives);
    }
    let mut out = Vec::with_capacity(d.records.len() + positives);
    out.extend(d.records.iter().cloned());
    let mut used: HashSet<String> = d.records.iter().map(|r| r.id.clone()).collect();
    for r in d.records.iter().filter(|r| r.label.is_positive()) {
        // the suffix repeats only when oversampling an oversampled set
        let mut id = format!("{}{}", r.id, DUP_SUFFIX);
        while used.contains(&id) {
            id.push_str(DUP_SUFFIX);
        }
        used.insert(id.clone());
        out.push(LabeledSentence::new(id, r.text.clone(), r.label));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    Dataset::new(out, d.split)
}
