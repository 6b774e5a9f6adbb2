//! The `sugmine` command line. Lives in the library so tests can drive it
//! in-process; `main.rs` only wires up the standard streams.
//!
//! Precedence for every setting: built-in default, then the config file
//! (`--config` or `$SUGMINE_CONFIG`), then command-line flags.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{require, ConfigError, RunConfig, CONFIG_ENV};
use crate::corpus::{
    load_dataset, oversample, write_dataset, CorpusError, Dataset, DatasetFormat, Distribution,
    Label, SplitTag,
};
use crate::eval::{
    confusion_csv, confusion_table, evaluate, keyword_analysis, reference_for, EvalReport,
    Prediction,
};
use crate::model::{train, ModelKind, TrainedModel};
use crate::neural::{load_embeddings, LoadOptions};
use crate::normalize::Normalizer;

#[derive(Debug, Parser)]
#[command(name = "sugmine", version, about = "Suggestion mining for forum text")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Seed for oversampling and training [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for generated files [default: out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Standard-output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize train/trial files and write the oversampled training set.
    Prepare {
        /// Training file; defaults to paths.train.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Trial file; defaults to paths.trial.
        #[arg(long)]
        trial: Option<PathBuf>,
    },
    /// Fit a model and report its training-set scores.
    Train {
        /// Labelled training file; defaults to paths.train.
        #[arg(long)]
        input: Option<PathBuf>,
        /// nb, logreg, svm or lstm.
        #[arg(long, value_parser = parse_kind)]
        kind: Option<ModelKind>,
        /// Output model path; defaults to <out-dir>/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Score a model, or a predictions file, against a labelled dataset.
    Evaluate {
        #[arg(long, conflicts_with = "predictions")]
        model: Option<PathBuf>,
        /// Labelled dataset; defaults to paths.test.
        #[arg(long)]
        input: Option<PathBuf>,
        /// `id,label` rows to score instead of running a model.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Keyword analysis of false positives plus a confusion-matrix export.
    Analyze {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labelled dataset; defaults to paths.train.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Comma-separated keyword list.
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
    },
    /// Label each input line (standard input by default).
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Normalize each input line (standard input by default).
    Normalize {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load(path: &Path, split: SplitTag) -> Result<Dataset, CliError> {
    load_dataset(path, &DatasetFormat::for_path(path, split)).map_err(|e| match e {
        CorpusError::MissingFile { .. } => CliError::Usage(e.to_string()),
        e => runtime(e),
    })
}

/// Files are staged and written only once every step has succeeded.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn add(&mut self, path: PathBuf, body: String) {
        self.0.push((path, body));
    }

    fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.add(path, s);
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.0.len());
        for (path, body) in self.0 {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(&path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

struct Ctx<'a> {
    cfg: RunConfig,
    format: Format,
    stdin: &'a mut dyn BufRead,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn out(&mut self, text: &str) -> Result<(), CliError> {
        self.stdout.write_all(text.as_bytes()).map_err(runtime)
    }

    fn emit<T: Serialize>(&mut self, text: &str, value: &T) -> Result<(), CliError> {
        match self.format {
            Format::Text => self.out(text),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
                s.push('\n');
                self.out(&s)
            }
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn model_path(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.unwrap_or_else(|| self.out_path("model.json"))
    }

    fn input<'p>(
        &self,
        flag: &'p Option<PathBuf>,
        configured: &'p Option<PathBuf>,
        what: &'static str,
    ) -> Result<&'p Path, CliError> {
        let p = flag.as_deref().or(configured.as_deref()).ok_or_else(|| {
            CliError::Usage(format!(
                "no {what} given: pass --input or set it in the config"
            ))
        })?;
        Ok(require(p, what)?)
    }

    fn lines(&mut self, input: Option<&Path>) -> Result<Vec<String>, CliError> {
        match input {
            Some(p) => {
                let text = std::fs::read_to_string(require(p, "input file")?)
                    .map_err(|e| runtime(format!("{}: {e}", p.display())))?;
                Ok(text.lines().map(str::to_string).collect())
            }
            None => self
                .stdin
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| runtime(format!("standard input: {e}"))),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(require(p, "config file")?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    if let Command::Train { kind: Some(k), .. } = &cli.command {
        cfg.model.kind = *k;
    }
    cfg.validate()?;
    let mut ctx = Ctx {
        cfg,
        format: cli.format,
        stdin,
        stdout,
    };
    match cli.command {
        Command::Prepare { input, trial } => cmd_prepare(&mut ctx, input, trial),
        Command::Train {
            input,
            model,
            embeddings,
            ..
        } => cmd_train(&mut ctx, input, model, embeddings),
        Command::Evaluate {
            model,
            input,
            predictions,
        } => cmd_evaluate(&mut ctx, model, input, predictions),
        Command::Analyze {
            model,
            input,
            keywords,
        } => cmd_analyze(&mut ctx, model, input, keywords),
        Command::Predict { model, input } => cmd_predict(&mut ctx, model, input),
        Command::Normalize { input } => cmd_normalize(&mut ctx, input),
    }
}

#[derive(Debug, Serialize)]
struct SplitSummary {
    file: String,
    records: usize,
    before: Distribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    after_oversampling: Option<Distribution>,
    /// Records whose text normalizes to nothing; kept with their raw text.
    empty_after_normalization: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PrepareReport {
    seed: u64,
    normalizer_fingerprint: String,
    train: SplitSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    trial: Option<SplitSummary>,
}

fn dist_line(d: &Distribution) -> String {
    format!(
        "suggestion {} / non_suggestion {} (total {})",
        d.suggestion,
        d.non_suggestion,
        d.total()
    )
}

fn normalized_copy(n: &Normalizer, d: &Dataset) -> (Dataset, Vec<String>) {
    let mut empty = Vec::new();
    let mut ids = d.records.iter();
    let out = d.map_text(|t| {
        let id = ids.next().map(|r| r.id.clone()).unwrap_or_default();
        let s = n.preprocess(t);
        if s.trim().is_empty() {
            empty.push(id);
            t.to_string()
        } else {
            s
        }
    });
    (out, empty)
}

fn cmd_prepare(
    ctx: &mut Ctx<'_>,
    input: Option<PathBuf>,
    trial: Option<PathBuf>,
) -> Result<(), CliError> {
    let train_path = ctx
        .input(&input, &ctx.cfg.paths.train, "training file")?
        .to_path_buf();
    let trial_path = match trial.as_ref().or(ctx.cfg.paths.trial.as_ref()) {
        Some(p) => Some(require(p, "trial file")?.to_path_buf()),
        None => None,
    };
    let normalizer = ctx.cfg.normalizer()?;
    let train_ds = load(&train_path, SplitTag::Train)?;
    let trial_ds = trial_path
        .as_deref()
        .map(|p| load(p, SplitTag::Trial))
        .transpose()?;

    let mut outputs = Outputs::default();
    let (norm_train, empty_train) = normalized_copy(&normalizer, &train_ds);
    let over = oversample(&norm_train, ctx.cfg.seed).map_err(runtime)?;
    outputs.add(
        ctx.out_path("train.normalized.csv"),
        write_dataset(&norm_train, b',').map_err(runtime)?,
    );
    outputs.add(
        ctx.out_path("train.oversampled.csv"),
        write_dataset(&over, b',').map_err(runtime)?,
    );
    let trial_summary = match (&trial_path, &trial_ds) {
        (Some(p), Some(d)) => {
            let (norm, empty) = normalized_copy(&normalizer, d);
            outputs.add(
                ctx.out_path("trial.normalized.csv"),
                write_dataset(&norm, b',').map_err(runtime)?,
            );
            Some(SplitSummary {
                file: p.display().to_string(),
                records: d.len(),
                before: d.distribution(),
                after_oversampling: None,
                empty_after_normalization: empty,
            })
        }
        _ => None,
    };
    let report = PrepareReport {
        seed: ctx.cfg.seed,
        normalizer_fingerprint: normalizer.fingerprint().to_string(),
        train: SplitSummary {
            file: train_path.display().to_string(),
            records: train_ds.len(),
            before: train_ds.distribution(),
            after_oversampling: Some(over.distribution()),
            empty_after_normalization: empty_train,
        },
        trial: trial_summary,
    };
    let mut text = format!(
        "train            {}\noversampled      {}\n",
        dist_line(&report.train.before),
        dist_line(&over.distribution())
    );
    if let Some(t) = &report.trial {
        text.push_str(&format!("trial            {}\n", dist_line(&t.before)));
    }
    outputs.add(ctx.out_path("distribution.txt"), text.clone());
    outputs.json(ctx.out_path("distribution.json"), &report);
    outputs.commit()?;
    ctx.emit(&text, &report)
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    kind: ModelKind,
    model: String,
    records: usize,
    train_f1: f64,
    train_precision: f64,
    train_recall: f64,
    reference_train_f1: Option<f64>,
}

fn cmd_train(
    ctx: &mut Ctx<'_>,
    input: Option<PathBuf>,
    model: Option<PathBuf>,
    embeddings: Option<PathBuf>,
) -> Result<(), CliError> {
    let train_path = ctx
        .input(&input, &ctx.cfg.paths.train, "training file")?
        .to_path_buf();
    let settings = ctx.cfg.train_settings();
    let emb_path = match embeddings.as_ref().or(ctx.cfg.paths.embeddings.as_ref()) {
        Some(p) if settings.kind == ModelKind::Lstm => {
            Some(require(p, "embeddings file")?.to_path_buf())
        }
        None if settings.kind == ModelKind::Lstm => {
            return Err(CliError::Usage(
                "the lstm model needs --embeddings or paths.embeddings".into(),
            ))
        }
        _ => None,
    };
    let normalizer = ctx.cfg.normalizer()?;
    let model_path = ctx.model_path(model);
    let data = load(&train_path, SplitTag::Train)?;
    let table = match &emb_path {
        Some(p) => {
            let words: std::collections::HashSet<String> = data
                .records
                .iter()
                .flat_map(|r| normalizer.preprocess_tokens(&r.text))
                .collect();
            let opts = LoadOptions {
                dim: Some(settings.lstm_shape.input_dim),
                keep: Some(&words),
            };
            Some(load_embeddings(p, &opts).map_err(runtime)?.0)
        }
        None => None,
    };
    let (trained, log) = train(&data, &normalizer, &settings, table.as_ref()).map_err(runtime)?;
    let preds = trained
        .predict_dataset(&normalizer, &data)
        .map_err(runtime)?;
    let report = evaluate(&data, &preds).map_err(runtime)?;

    let mut outputs = Outputs::default();
    let (json, fpath, ftext) = trained.to_files(&model_path);
    outputs.add(fpath, ftext);
    outputs.add(model_path.clone(), json);
    outputs.json(ctx.out_path("training_log.json"), &log);
    outputs.json(ctx.out_path("train_report.json"), &report);
    outputs.commit()?;

    let summary = TrainSummary {
        kind: settings.kind,
        model: model_path.display().to_string(),
        records: data.len(),
        train_f1: report.f1,
        train_precision: report.precision,
        train_recall: report.recall,
        reference_train_f1: reference_for(settings.kind.name()).map(|r| r.f1_train),
    };
    let mut text = format!(
        "model {} ({}) written to {}\n",
        settings.kind,
        settings.feature_name(),
        summary.model
    );
    text.push_str(&report.summary());
    if let Some(r) = summary.reference_train_f1 {
        text.push_str(&format!("reference  {r:.3}\n"));
    }
    ctx.emit(&text, &summary)
}

/// Reads `id,label` rows; labels may be digits or names. A header row is
/// skipped when its label column is not a label.
pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format!("row {}: {e}", i + 1))?;
        if rec.len() < 2 {
            return Err(format!("row {}: expected id,label", i + 1));
        }
        let raw = rec[1].trim();
        let label = Label::from_digit(raw).or(match raw {
            "suggestion" => Some(Label::Suggestion),
            "non_suggestion" => Some(Label::NonSuggestion),
            _ => None,
        });
        match label {
            Some(l) => {
                let mut p = Prediction::new(rec[0].to_string(), l);
                if let Some(s) = rec.get(2).and_then(|s| s.trim().parse().ok()) {
                    p.score = Some(s);
                }
                out.push(p);
            }
            None if i == 0 => continue,
            None => return Err(format!("row {}: bad label {raw:?}", i + 1)),
        }
    }
    Ok(out)
}

fn load_model(ctx: &Ctx<'_>, flag: Option<PathBuf>) -> Result<TrainedModel, CliError> {
    let p = ctx.model_path(flag);
    TrainedModel::load(require(&p, "model file")?).map_err(runtime)
}

#[derive(Debug, Serialize)]
struct EvaluateSummary<'a> {
    input: String,
    report: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_test_f1: Option<f64>,
}

fn cmd_evaluate(
    ctx: &mut Ctx<'_>,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    predictions: Option<PathBuf>,
) -> Result<(), CliError> {
    let data_path = ctx
        .input(&input, &ctx.cfg.paths.test, "evaluation file")?
        .to_path_buf();
    let pred_path = predictions
        .as_deref()
        .map(|p| require(p, "predictions file").map(Path::to_path_buf))
        .transpose()?;
    let normalizer = ctx.cfg.normalizer()?;
    let gold = load(&data_path, SplitTag::Test)?;
    let (preds, kind) = match pred_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            let preds =
                parse_predictions(&text).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            (preds, None)
        }
        None => {
            let m = load_model(ctx, model)?;
            (
                m.predict_dataset(&normalizer, &gold).map_err(runtime)?,
                Some(m.kind()),
            )
        }
    };
    let report = evaluate(&gold, &preds).map_err(runtime)?;
    let summary = EvaluateSummary {
        input: data_path.display().to_string(),
        report: &report,
        reference_test_f1: kind
            .and_then(|k| reference_for(k.name()))
            .map(|r| r.f1_test),
    };
    let mut text = report.summary();
    if let Some(r) = summary.reference_test_f1 {
        text.push_str(&format!("reference  {r:.3}\n"));
    }
    let mut outputs = Outputs::default();
    outputs.json(ctx.out_path("eval_report.json"), &summary);
    outputs.add(ctx.out_path("eval_summary.txt"), text.clone());
    outputs.commit()?;
    ctx.emit(&text, &summary)
}

fn cmd_analyze(
    ctx: &mut Ctx<'_>,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    keywords: Option<Vec<String>>,
) -> Result<(), CliError> {
    let data_path = ctx
        .input(&input, &ctx.cfg.paths.train, "analysis file")?
        .to_path_buf();
    let normalizer = ctx.cfg.normalizer()?;
    let m = load_model(ctx, model)?;
    let gold = load(&data_path, SplitTag::Other)?;
    let preds = m.predict_dataset(&normalizer, &gold).map_err(runtime)?;
    let report = evaluate(&gold, &preds).map_err(runtime)?;
    let keywords = keywords.unwrap_or_else(|| ctx.cfg.analysis.keywords.clone());
    let kw = keyword_analysis(
        &report,
        &gold,
        &keywords,
        &normalizer,
        ctx.cfg.analysis.exemplars,
    )
    .map_err(runtime)?;
    let text = format!("{}{}", kw.summary(), confusion_table(&report.matrix));
    let mut outputs = Outputs::default();
    outputs.json(ctx.out_path("keyword_report.json"), &kw);
    outputs.add(ctx.out_path("keyword_summary.txt"), kw.summary());
    outputs.add(ctx.out_path("confusion.csv"), confusion_csv(&report.matrix));
    outputs.add(
        ctx.out_path("confusion.txt"),
        confusion_table(&report.matrix),
    );
    outputs.commit()?;
    ctx.emit(&text, &kw)
}

fn cmd_predict(
    ctx: &mut Ctx<'_>,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
) -> Result<(), CliError> {
    let normalizer = ctx.cfg.normalizer()?;
    let m = load_model(ctx, model)?;
    m.check_normalizer(&normalizer).map_err(runtime)?;
    let lines = ctx.lines(input.as_deref())?;
    let mut out = String::new();
    for line in &lines {
        let p = m.predict_text(&normalizer, line).map_err(runtime)?;
        match ctx.format {
            Format::Text => out.push_str(p.label.name()),
            Format::Json => {
                out.push_str(&serde_json::json!({ "label": p.label, "score": p.score }).to_string())
            }
        }
        out.push('\n');
    }
    ctx.out(&out)
}

fn cmd_normalize(ctx: &mut Ctx<'_>, input: Option<PathBuf>) -> Result<(), CliError> {
    let normalizer = ctx.cfg.normalizer()?;
    let lines = ctx.lines(input.as_deref())?;
    let mut out = String::new();
    for line in &lines {
        match ctx.format {
            Format::Text => out.push_str(&normalizer.preprocess(line)),
            Format::Json => out.push_str(
                &serde_json::to_string(&normalizer.preprocess_tokens(line)).map_err(runtime)?,
            ),
        }
        out.push('\n');
    }
    ctx.out(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = stdin.as_bytes();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("sugmine").chain(args.iter().copied()),
            &mut input,
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn normalize_filter() {
        let (code, out, _) = run_args(&["normalize"], "call me at 5pm on 12/03/2019\n\n");
        assert_eq!(code, 0);
        assert_eq!(out, "call me at <time> on <date>\n\n");
    }

    #[test]
    fn unknown_kind_is_usage_error() {
        let (code, _, err) = run_args(&["train", "--kind", "cnn"], "");
        assert_eq!(code, 2);
        assert!(err.contains("cnn"));
    }

    #[test]
    fn missing_input_names_path() {
        let (code, _, err) = run_args(&["prepare", "--input", "/no/such/train.csv"], "");
        assert_eq!(code, 2);
        assert!(err.contains("/no/such/train.csv"), "{err}");
    }

    #[test]
    fn predictions_parsing() {
        let p = parse_predictions("id,label\na,1\nb,non_suggestion,-0.5\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].score, Some(-0.5));
        assert!(parse_predictions("a,1\nb,x\n").is_err());
    }
}
