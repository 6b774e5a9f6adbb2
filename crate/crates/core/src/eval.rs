//! Positive-class metrics, confusion matrices and false-positive keyword
//! analysis. Suggestion is the positive class throughout.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Label};
use crate::normalize::Normalizer;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no prediction for gold ids: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for ids not in the gold set: {}", .0.join(", "))]
    SurplusPredictions(Vec<String>),
    #[error("more than one prediction for id {0:?}")]
    DuplicatePrediction(String),
    #[error("record {0:?} of the report is not in the corpus")]
    UnknownRecord(String),
    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("confusion file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (gold, pred) in pairs {
            m.record(gold, pred);
        }
        m
    }

    pub fn record(&mut self, gold: Label, predicted: Label) {
        match (gold.is_positive(), predicted.is_positive()) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        let f1 = if p + r > 0.0 {
            Some(2.0 * p * r / (p + r))
        } else {
            None
        };
        Metrics {
            precision: p,
            recall: r,
            f1: f1.unwrap_or(0.0),
            degenerate: precision.is_none() || recall.is_none() || f1.is_none(),
        }
    }
}

/// Precision, recall and F1 of the positive class. Undefined ratios are
/// reported as 0 with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// One model output for a dataset record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    /// Decision value, when the model exposes one.
    pub score: Option<f64>,
}

impl Prediction {
    pub fn new(id: impl Into<String>, label: Label) -> Self {
        Prediction {
            id: id.into(),
            label,
            score: None,
        }
    }

    pub fn scored(id: impl Into<String>, label: Label, score: f64) -> Self {
        Prediction {
            id: id.into(),
            label,
            score: Some(score),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub gold: Label,
    pub predicted: Label,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
    /// In gold record order.
    pub outcomes: Vec<RecordOutcome>,
}

impl EvalReport {
    pub fn false_positives(&self) -> impl Iterator<Item = &RecordOutcome> {
        self.outcomes
            .iter()
            .filter(|o| !o.gold.is_positive() && o.predicted.is_positive())
    }

    pub fn false_negatives(&self) -> impl Iterator<Item = &RecordOutcome> {
        self.outcomes
            .iter()
            .filter(|o| o.gold.is_positive() && !o.predicted.is_positive())
    }

    pub fn summary(&self) -> String {
        let m = &self.matrix;
        let mut s = String::new();
        let _ = writeln!(s, "records    {}", m.total());
        let _ = writeln!(s, "tp {}  fp {}  fn {}  tn {}", m.tp, m.fp, m.fn_, m.tn);
        let _ = writeln!(s, "precision  {:.4}", self.precision);
        let _ = writeln!(s, "recall     {:.4}", self.recall);
        let _ = write!(s, "f1         {:.4}", self.f1);
        if self.degenerate {
            s.push_str("  (degenerate: a metric denominator is zero)");
        }
        s.push('\n');
        s
    }
}

/// Scores predictions against gold labels. Prediction ids must cover the
/// gold ids exactly.
pub fn evaluate(gold: &Dataset, predictions: &[Prediction]) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    let gold_ids: HashSet<&str> = gold.records.iter().map(|r| r.id.as_str()).collect();
    let missing: Vec<String> = gold
        .records
        .iter()
        .filter(|r| !by_id.contains_key(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let surplus: Vec<String> = predictions
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !surplus.is_empty() {
        return Err(EvalError::SurplusPredictions(surplus));
    }
    let mut matrix = ConfusionMatrix::default();
    let outcomes: Vec<RecordOutcome> = gold
        .records
        .iter()
        .map(|r| {
            let p = by_id[r.id.as_str()];
            matrix.record(r.label, p.label);
            RecordOutcome {
                id: r.id.clone(),
                gold: r.label,
                predicted: p.label,
                score: p.score,
            }
        })
        .collect();
    let m = matrix.metrics();
    Ok(EvalReport {
        matrix,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        degenerate: m.degenerate,
        outcomes,
    })
}

pub const DEFAULT_KEYWORDS: [&str; 8] = [
    "want", "please", "add", "support", "would", "could", "should", "need",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub text: String,
    pub gold: Label,
    pub predicted: Label,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordReport {
    pub keywords: Vec<String>,
    pub false_positives: usize,
    /// False when there are no false positives; fractions are then absent.
    pub applicable: bool,
    pub fraction_fp_with_any_keyword: Option<f64>,
    pub per_keyword_fraction: BTreeMap<String, f64>,
    pub fp_exemplars: Vec<Exemplar>,
    pub fn_exemplars: Vec<Exemplar>,
}

/// Fraction of false positives whose normalized text contains a keyword as a
/// whole token (case-insensitive), overall and per keyword.
///
/// Exemplar lists hold at most `exemplar_cap` records each, ordered by
/// absolute decision value (largest first) when every record has one, else
/// by id.
pub fn keyword_analysis(
    report: &EvalReport,
    corpus: &Dataset,
    keywords: &[String],
    normalizer: &Normalizer,
    exemplar_cap: usize,
) -> Result<KeywordReport, EvalError> {
    let text_of: HashMap<&str, &str> = corpus
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.text.as_str()))
        .collect();
    let lookup = |id: &str| -> Result<&str, EvalError> {
        text_of
            .get(id)
            .copied()
            .ok_or_else(|| EvalError::UnknownRecord(id.to_string()))
    };
    let keywords_lc: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let fps: Vec<&RecordOutcome> = report.false_positives().collect();
    let mut any = 0usize;
    let mut per: BTreeMap<String, usize> = keywords_lc.iter().map(|k| (k.clone(), 0)).collect();
    for fp in &fps {
        let tokens: HashSet<String> = normalizer
            .preprocess_tokens(lookup(&fp.id)?)
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect();
        let mut hit = false;
        for k in &keywords_lc {
            if tokens.contains(k) {
                *per.get_mut(k).expect("initialized above") += 1;
                hit = true;
            }
        }
        if hit {
            any += 1;
        }
    }
    let applicable = !fps.is_empty();
    let n = fps.len() as f64;
    let exemplars = |items: Vec<&RecordOutcome>| -> Result<Vec<Exemplar>, EvalError> {
        let mut items = items;
        if items.iter().all(|o| o.score.is_some()) {
            items.sort_by(|a, b| {
                let (sa, sb) = (a.score.unwrap_or(0.0).abs(), b.score.unwrap_or(0.0).abs());
                sb.total_cmp(&sa).then_with(|| a.id.cmp(&b.id))
            });
        } else {
            items.sort_by(|a, b| a.id.cmp(&b.id));
        }
        items
            .into_iter()
            .take(exemplar_cap)
            .map(|o| {
                Ok(Exemplar {
                    id: o.id.clone(),
                    text: lookup(&o.id)?.to_string(),
                    gold: o.gold,
                    predicted: o.predicted,
                    score: o.score,
                })
            })
            .collect()
    };
    Ok(KeywordReport {
        keywords: keywords_lc.clone(),
        false_positives: fps.len(),
        applicable,
        fraction_fp_with_any_keyword: applicable.then(|| any as f64 / n),
        per_keyword_fraction: if applicable {
            per.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
        } else {
            BTreeMap::new()
        },
        fp_exemplars: exemplars(fps)?,
        fn_exemplars: exemplars(report.false_negatives().collect())?,
    })
}

impl KeywordReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "false positives  {}", self.false_positives);
        match self.fraction_fp_with_any_keyword {
            Some(f) => {
                let _ = writeln!(s, "with any keyword {:.4}", f);
                for (k, v) in &self.per_keyword_fraction {
                    let _ = writeln!(s, "  {k:<10} {v:.4}");
                }
            }
            None => s.push_str("keyword fractions not applicable (no false positives)\n"),
        }
        s
    }
}

pub const CONFUSION_HEADER: &str = "label,pred_pos,pred_neg";

/// The 2x2 grid as delimited text: gold rows, predicted columns.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    format!(
        "{CONFUSION_HEADER}\ngold_pos,{},{}\ngold_neg,{},{}\n",
        m.tp, m.fn_, m.fp, m.tn
    )
}

pub fn confusion_table(m: &ConfusionMatrix) -> String {
    let w = [m.tp, m.fp, m.fn_, m.tn]
        .iter()
        .map(|v| v.to_string().len())
        .max()
        .unwrap_or(1)
        .max(14);
    format!(
        "{:<16} {:>w$} {:>w$}\n{:<16} {:>w$} {:>w$}\n{:<16} {:>w$} {:>w$}\n",
        "gold \\ predicted",
        "suggestion",
        "non_suggestion",
        "suggestion",
        m.tp,
        m.fn_,
        "non_suggestion",
        m.fp,
        m.tn,
    )
}

pub fn parse_confusion(text: &str) -> Result<ConfusionMatrix, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(CONFUSION_HEADER) {
        return Err(EvalError::Parse {
            line: 1,
            message: format!("expected header {CONFUSION_HEADER:?}"),
        });
    }
    let mut row = |n: usize, name: &str| -> Result<(usize, usize), EvalError> {
        let l = lines.next().ok_or(EvalError::Parse {
            line: n,
            message: "missing row".into(),
        })?;
        let cols: Vec<&str> = l.split(',').collect();
        match cols.as_slice() {
            [label, a, b] if *label == name => {
                let p = |s: &str| {
                    s.parse::<usize>().map_err(|_| EvalError::Parse {
                        line: n,
                        message: format!("bad count {s:?}"),
                    })
                };
                Ok((p(a)?, p(b)?))
            }
            _ => Err(EvalError::Parse {
                line: n,
                message: format!("expected {name} row"),
            }),
        }
    };
    let (tp, fn_) = row(2, "gold_pos")?;
    let (fp, tn) = row(3, "gold_neg")?;
    Ok(ConfusionMatrix { tp, fp, fn_, tn })
}

/// Writes the delimited grid to `path` and the rendered table next to it
/// (same stem, `.txt`). Returns the table path.
pub fn export_confusion(m: &ConfusionMatrix, path: &Path) -> Result<PathBuf, EvalError> {
    let table_path = if path.extension().is_some_and(|e| e == "txt") {
        path.with_extension("table.txt")
    } else {
        path.with_extension("txt")
    };
    for (p, body) in [(path, confusion_csv(m)), (&table_path, confusion_table(m))] {
        std::fs::write(p, body).map_err(|e| EvalError::Write {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    Ok(table_path)
}

/// A published result row kept for side-by-side reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub model: &'static str,
    pub f1_train: f64,
    pub f1_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub team: &'static str,
    pub f1: f64,
}

pub const REFERENCE_SCORES: [ReferenceRow; 6] = [
    ReferenceRow {
        model: "nb",
        f1_train: 0.641,
        f1_test: 0.517,
    },
    ReferenceRow {
        model: "logreg",
        f1_train: 0.679,
        f1_test: 0.572,
    },
    ReferenceRow {
        model: "svm",
        f1_train: 0.695,
        f1_test: 0.576,
    },
    ReferenceRow {
        model: "lstm",
        f1_train: 0.731,
        f1_test: 0.591,
    },
    ReferenceRow {
        model: "baseline",
        f1_train: 0.720,
        f1_test: 0.267,
    },
    ReferenceRow {
        model: "ulmfit",
        f1_train: 0.861,
        f1_test: 0.701,
    },
];

pub const LEADERBOARD: [LeaderboardRow; 6] = [
    LeaderboardRow {
        rank: 1,
        team: "OleNet",
        f1: 0.7812,
    },
    LeaderboardRow {
        rank: 2,
        team: "ThisIsCompetition",
        f1: 0.7778,
    },
    LeaderboardRow {
        rank: 3,
        team: "m_y",
        f1: 0.7761,
    },
    LeaderboardRow {
        rank: 4,
        team: "yimmon",
        f1: 0.7629,
    },
    LeaderboardRow {
        rank: 5,
        team: "NTUA-ISLab",
        f1: 0.7488,
    },
    LeaderboardRow {
        rank: 10,
        team: "MIDAS",
        f1: 0.7011,
    },
];

/// Share of false positives containing one of the default keywords, as
/// published for the transfer-learning model on training data.
pub const REFERENCE_FP_KEYWORD_FRACTION: f64 = 0.77;

pub fn reference_for(model: &str) -> Option<&'static ReferenceRow> {
    REFERENCE_SCORES.iter().find(|r| r.model == model)
}
