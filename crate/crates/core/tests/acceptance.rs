//! Acceptance harness: one line per criterion.
//!
//! Criteria that need the official task files read them from
//! `$SUGMINE_DATA_DIR` (`train.csv`/`test.csv`, or the organizer names
//! `V1.4_Training.csv`/`SubtaskA_EvaluationData_labeled.csv`). The recurrent
//! model additionally needs `$SUGMINE_EMBEDDINGS`. Without them those parts
//! print NOT RUN, or run the synthetic substitute where one is defined.
//!
//! Exit status is non-zero when any criterion prints FAIL.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sugmine::corpus::{
    load_dataset, oversample, Dataset, DatasetFormat, Label, LabeledSentence, SplitTag,
};
use sugmine::eval::{
    evaluate, keyword_analysis, reference_for, ConfusionMatrix, EvalReport, Prediction,
    DEFAULT_KEYWORDS, REFERENCE_FP_KEYWORD_FRACTION,
};
use sugmine::model::{train, ModelKind, TrainSettings, TrainedModel};
use sugmine::neural::{load_embeddings, LoadOptions};
use sugmine::normalize::Normalizer;

const ROW1_IN: &str = "ie9mobile does not do this :(";
const ROW1_OUT: &str = "ie mobile does not do this <emsad>";
const ROW2_IN: &str = "For example if you want a feed for every Tumblr feed containing the hashtags `` ``#retail #design \" \"; `` ``http://www.tumblr .com/tagged/retail+ design\"\"; would be a feedly feed.\"";
const ROW2_OUT: &str = "For example if you want a feed for every tumblr feed containing the hashtags <hashtag> retail <hashtag> design <url> would be a feedly feed";

const GOLDEN_LIMIT: Duration = Duration::from_secs(1);
const CLASSICAL_LIMIT: Duration = Duration::from_secs(300);
const ORACLE_LIMIT: Duration = Duration::from_secs(10);
const GRADIENT_LIMIT: Duration = Duration::from_secs(60);
const F1_TOLERANCE: f64 = 0.05;
const METRIC_TOLERANCE: f64 = 1e-12;
const NB_TOLERANCE: f64 = 1e-12;
const LOGISTIC_GRAD_TOLERANCE: f64 = 1e-4;
const LSTM_GRAD_TOLERANCE: f64 = 1e-3;
const GRAD_SEEDS: u64 = 25;
const KEYWORD_BAND: f64 = 0.15;
const OFFICIAL_TRAIN: (usize, usize) = (2085, 6415);
const FUZZ_CASES: usize = 10_000;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Warn,
    NotRun,
}

impl Status {
    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
            Status::NotRun => "NOT RUN",
        }
    }
}

struct Outcome {
    id: &'static str,
    status: Status,
    detail: String,
}

fn line(id: &'static str, status: Status, detail: String) -> Outcome {
    println!("{:<8} [{id}] {detail}", status.tag());
    Outcome { id, status, detail }
}

struct Official {
    train: Dataset,
    test: Dataset,
}

fn first_existing(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

fn official_data() -> Option<Official> {
    let dir = PathBuf::from(std::env::var_os("SUGMINE_DATA_DIR")?);
    let train = first_existing(&dir, &["train.csv", "V1.4_Training.csv"])?;
    let test = first_existing(&dir, &["test.csv", "SubtaskA_EvaluationData_labeled.csv"])?;
    let load = |p: &Path, split| {
        load_dataset(p, &DatasetFormat::for_path(p, split))
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()))
    };
    Some(Official {
        train: load(&train, SplitTag::Train),
        test: load(&test, SplitTag::Test),
    })
}

fn golden_rows() -> Outcome {
    let start = Instant::now();
    let n = Normalizer::shared_default();
    let exact = [(ROW1_IN, ROW1_OUT), (ROW2_IN, ROW2_OUT)]
        .iter()
        .filter(|(i, o)| n.preprocess(i) == *o)
        .count();
    let took = start.elapsed();
    line(
        "1",
        Status::of(exact == 2 && took < GOLDEN_LIMIT),
        format!("normalization golden rows: {exact}/2 byte-exact in {took:.2?} (limit {GOLDEN_LIMIT:?})"),
    )
}

fn counts(d: &Dataset) -> (usize, usize) {
    let dist = d.distribution();
    (dist.get(Label::Suggestion), dist.get(Label::NonSuggestion))
}

fn oversampling(official: Option<&Official>) -> Outcome {
    if let Some(o) = official {
        let before = counts(&o.train);
        let after = counts(&oversample(&o.train, 42).unwrap());
        let want = (2 * OFFICIAL_TRAIN.0, OFFICIAL_TRAIN.1);
        return line(
            "2",
            Status::of(before == OFFICIAL_TRAIN && after == want),
            format!(
                "oversampling on official train: {}/{} -> {}/{} (expected {}/{} -> {}/{})",
                before.0,
                before.1,
                after.0,
                after.1,
                OFFICIAL_TRAIN.0,
                OFFICIAL_TRAIN.1,
                want.0,
                want.1
            ),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for case in 0..200 {
        let n = rng.gen_range(2..80);
        let records: Vec<LabeledSentence> = (0..n)
            .map(|i| {
                let label = if i == 0 || rng.gen_bool(0.3) {
                    Label::Suggestion
                } else {
                    Label::NonSuggestion
                };
                LabeledSentence::new(format!("c{case}-{i}"), format!("text {i}"), label)
            })
            .collect();
        let d = Dataset::new(records, SplitTag::Train).unwrap();
        let (pos, neg) = counts(&d);
        let out = oversample(&d, rng.gen()).unwrap();
        let ids: std::collections::HashSet<&str> =
            out.records.iter().map(|r| r.id.as_str()).collect();
        if counts(&out) != (2 * pos, neg) || ids.len() != out.len() {
            bad += 1;
        }
    }
    line(
        "2",
        Status::of(bad == 0),
        format!("oversampling (synthetic substitute, official data absent): {}/200 datasets doubled exactly", 200 - bad),
    )
}

struct Trained {
    kind: ModelKind,
    model: TrainedModel,
    test: EvalReport,
}

fn fit(kind: ModelKind, o: &Official, n: &Normalizer) -> Option<Trained> {
    let train_set = oversample(&o.train, 42).unwrap();
    let table = if kind == ModelKind::Lstm {
        let path = PathBuf::from(std::env::var_os("SUGMINE_EMBEDDINGS")?);
        let words = train_set
            .records
            .iter()
            .flat_map(|r| n.preprocess_tokens(&r.text))
            .collect();
        let opts = LoadOptions {
            dim: None,
            keep: Some(&words),
        };
        Some(load_embeddings(&path, &opts).unwrap().0)
    } else {
        None
    };
    let (model, _) = train(&train_set, n, &TrainSettings::new(kind), table.as_ref()).unwrap();
    let preds = model.predict_dataset(n, &o.test).unwrap();
    let test = evaluate(&o.test, &preds).unwrap();
    Some(Trained { kind, model, test })
}

fn classical(official: Option<&Official>) -> (Vec<Outcome>, Vec<Trained>) {
    let Some(o) = official else {
        return (
            vec![
                line(
                    "3",
                    Status::NotRun,
                    "classical reproduction: SUGMINE_DATA_DIR not set".into(),
                ),
                line(
                    "3-lstm",
                    Status::NotRun,
                    "recurrent vs nb: SUGMINE_DATA_DIR not set".into(),
                ),
            ],
            Vec::new(),
        );
    };
    let n = Normalizer::shared_default();
    let start = Instant::now();
    let mut trained = Vec::new();
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [ModelKind::Nb, ModelKind::Logreg, ModelKind::Svm] {
        let t = fit(kind, o, n).expect("sparse models need no embeddings");
        let target = reference_for(kind.name()).unwrap().f1_test;
        let within = (t.test.f1 - target).abs() <= F1_TOLERANCE;
        ok &= within;
        parts.push(format!(
            "{} {:.3} (target {target:.3})",
            kind.name(),
            t.test.f1
        ));
        trained.push(t);
    }
    let took = start.elapsed();
    let mut out = vec![line(
        "3",
        Status::of(ok && took < CLASSICAL_LIMIT),
        format!(
            "classical test F1 within +/-{F1_TOLERANCE}: {} in {took:.1?} (limit {CLASSICAL_LIMIT:?})",
            parts.join(", ")
        ),
    )];
    let nb_f1 = trained[0].test.f1;
    match fit(ModelKind::Lstm, o, n) {
        Some(t) => {
            let gap = t.test.f1 - nb_f1;
            let status = if gap > 0.0 {
                Status::Pass
            } else {
                Status::Warn
            };
            out.push(line(
                "3-lstm",
                status,
                format!(
                    "recurrent test F1 {:.3} vs nb {nb_f1:.3} (gap {gap:+.3})",
                    t.test.f1
                ),
            ));
            trained.push(t);
        }
        None => out.push(line(
            "3-lstm",
            Status::NotRun,
            "recurrent vs nb: SUGMINE_EMBEDDINGS not set".into(),
        )),
    }
    (out, trained)
}

fn nb_oracle() -> Outcome {
    let start = Instant::now();
    let (checked, worst) = common::oracles::nb_sweep();
    let took = start.elapsed();
    line(
        "4",
        Status::of(worst <= NB_TOLERANCE && took < ORACLE_LIMIT),
        format!(
            "nb vs brute-force oracle: {checked} corpora, max log-posterior gap {worst:.1e} (limit {NB_TOLERANCE:.0e}) in {took:.2?}"
        ),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let (lr_seeds, lr) = common::oracles::logistic_grad_check(GRAD_SEEDS);
    let (svm_seeds, svm) = common::oracles::svm_grad_check(4 * GRAD_SEEDS);
    let lstm = common::oracles::lstm_grad_check(GRAD_SEEDS);
    let took = start.elapsed();
    let ok = lr < LOGISTIC_GRAD_TOLERANCE
        && svm < LOGISTIC_GRAD_TOLERANCE
        && svm_seeds >= GRAD_SEEDS as usize
        && lr_seeds >= GRAD_SEEDS as usize
        && lstm < LSTM_GRAD_TOLERANCE
        && took < GRADIENT_LIMIT;
    line(
        "5",
        Status::of(ok),
        format!(
            "gradient checks: logistic {lr:.1e} over {lr_seeds} seeds, svm {svm:.1e} over {svm_seeds} kink-free seeds (limit {LOGISTIC_GRAD_TOLERANCE:.0e}), lstm {lstm:.1e} over {GRAD_SEEDS} seeds (limit {LSTM_GRAD_TOLERANCE:.0e}) in {took:.2?}"
        ),
    )
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let rows: Vec<(bool, bool)> = (0..n)
            .map(|_| (rng.gen_bool(0.4), rng.gen_bool(0.4)))
            .collect();
        let records: Vec<LabeledSentence> = rows
            .iter()
            .enumerate()
            .map(|(i, &(g, _))| {
                LabeledSentence::new(format!("{case}-{i}"), "t", common::oracles::lab(g))
            })
            .collect();
        let gold = Dataset::new(records, SplitTag::Test).unwrap();
        let preds: Vec<Prediction> = rows
            .iter()
            .enumerate()
            .map(|(i, &(_, p))| Prediction::new(format!("{case}-{i}"), common::oracles::lab(p)))
            .collect();
        let f1 = evaluate(&gold, &preds).unwrap().f1;
        let tp = rows.iter().filter(|r| r.0 && r.1).count() as f64;
        let fp = rows.iter().filter(|r| !r.0 && r.1).count() as f64;
        let fn_ = rows.iter().filter(|r| r.0 && !r.1).count() as f64;
        let want = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        };
        worst = worst.max((f1 - want).abs());
    }
    let m = ConfusionMatrix::new(2, 1, 1, 0).metrics();
    let fixture = (m.f1 - 2.0 / 3.0).abs() <= METRIC_TOLERANCE;
    line(
        "6",
        Status::of(worst <= METRIC_TOLERANCE && fixture),
        format!(
            "metric identities: 1000 vectors, max F1 gap {worst:.1e} (limit {METRIC_TOLERANCE:.0e}); 2/3 fixture {}",
            if fixture { "exact" } else { "wrong" }
        ),
    )
}

fn keyword_fixture() -> Outcome {
    use Label::{NonSuggestion as N, Suggestion as S};
    let rows: [(&str, &str, Label, Label); 7] = [
        ("f1", "it would help", N, S),
        ("f2", "that would be odd", N, S),
        ("f3", "would you look at that", N, S),
        ("f4", "the menu is blue", N, S),
        ("t1", "please add it", S, S),
        ("n1", "nice app", N, N),
        ("m1", "add a button", S, N),
    ];
    let gold = Dataset::new(
        rows.iter()
            .map(|(i, t, g, _)| LabeledSentence::new(*i, *t, *g))
            .collect(),
        SplitTag::Train,
    )
    .unwrap();
    let preds: Vec<Prediction> = rows
        .iter()
        .map(|(i, _, _, p)| Prediction::new(*i, *p))
        .collect();
    let report = evaluate(&gold, &preds).unwrap();
    let keywords = vec!["would".to_string(), "add".to_string()];
    let k = keyword_analysis(&report, &gold, &keywords, Normalizer::shared_default(), 10).unwrap();
    // whitespace-token oracle over the false positives
    let fps: Vec<&str> = rows
        .iter()
        .filter(|r| r.2 == N && r.3 == S)
        .map(|r| r.1)
        .collect();
    let has = |t: &str, w: &str| t.split_whitespace().any(|x| x == w);
    let any = fps
        .iter()
        .filter(|t| keywords.iter().any(|w| has(t, w)))
        .count() as f64
        / fps.len() as f64;
    let would = fps.iter().filter(|t| has(t, "would")).count() as f64 / fps.len() as f64;
    let ok = k.false_positives == fps.len()
        && k.fraction_fp_with_any_keyword == Some(any)
        && k.per_keyword_fraction["would"] == would
        && k.per_keyword_fraction["add"] == 0.0;
    line(
        "7",
        Status::of(ok),
        format!(
            "keyword fixture: any {:?} (oracle {any}), would {} (oracle {would})",
            k.fraction_fp_with_any_keyword, k.per_keyword_fraction["would"]
        ),
    )
}

fn keyword_official(official: Option<&Official>, trained: &[Trained]) -> Outcome {
    let Some(o) = official else {
        return line(
            "7-official",
            Status::NotRun,
            "keyword fraction on official data: SUGMINE_DATA_DIR not set".into(),
        );
    };
    let best = trained
        .iter()
        .max_by(|a, b| a.test.f1.total_cmp(&b.test.f1))
        .expect("classical models trained");
    let n = Normalizer::shared_default();
    let preds = best.model.predict_dataset(n, &o.train).unwrap();
    let report = evaluate(&o.train, &preds).unwrap();
    let keywords: Vec<String> = DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect();
    let k = keyword_analysis(&report, &o.train, &keywords, n, 10).unwrap();
    let Some(frac) = k.fraction_fp_with_any_keyword else {
        return line(
            "7-official",
            Status::Warn,
            format!(
                "{} has no training-set false positives to analyze",
                best.kind.name()
            ),
        );
    };
    let inside = (frac - REFERENCE_FP_KEYWORD_FRACTION).abs() <= KEYWORD_BAND;
    line(
        "7-official",
        if inside { Status::Pass } else { Status::Warn },
        format!(
            "training-set FP keyword fraction with {}: {frac:.3} over {} FPs (reference {REFERENCE_FP_KEYWORD_FRACTION} +/- {KEYWORD_BAND}){}",
            best.kind.name(),
            k.false_positives,
            if inside { "" } else { "; outside band, different model family" }
        ),
    )
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "#",
        "@",
        ":)",
        ":(",
        "http://",
        "www.",
        ".com",
        "$",
        "%",
        "''",
        "``",
        ";",
        "\"",
        "-",
        "/",
        "5pm",
        "12/03/2019",
        "pls",
        "ie9",
        " ",
        "\t",
        "\n",
        "\u{200b}",
        "\u{301}",
        "😀",
    ];
    let len = rng.gen_range(0..40);
    let mut s = String::new();
    for _ in 0..len {
        match rng.gen_range(0..4) {
            0 => s.push(rng.gen::<char>()),
            1 => s.push_str(PIECES[rng.gen_range(0..PIECES.len())]),
            _ => s.push(rng.gen_range(b' '..=b'~') as char),
        }
    }
    s
}

fn pipeline(dir: &Path, out: &str) -> Result<(), String> {
    let run = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_sugmine"))
            .args(["--config", "run.toml", "--out-dir", out])
            .args(args)
            .current_dir(dir)
            .env_remove("SUGMINE_CONFIG")
            .output()
            .map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
        }
    };
    run(&["prepare"])?;
    let oversampled = format!("{out}/train.oversampled.csv");
    for kind in ["nb", "logreg", "svm", "lstm"] {
        let model = format!("{out}/{kind}.json");
        run(&[
            "train",
            "--kind",
            kind,
            "--input",
            &oversampled,
            "--model",
            &model,
        ])?;
        run(&["evaluate", "--model", &model])?;
        fs::rename(
            dir.join(out).join("eval_report.json"),
            dir.join(out).join(format!("eval_{kind}.json")),
        )
        .map_err(|e| e.to_string())?;
        run(&["analyze", "--model", &model])?;
    }
    Ok(())
}

fn fuzz_and_determinism() -> Outcome {
    let n = Normalizer::shared_default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    for _ in 0..FUZZ_CASES {
        let s = random_text(&mut rng);
        let ok = std::panic::catch_unwind(|| n.preprocess(&s)).is_ok_and(|a| a == n.preprocess(&s));
        if !ok {
            failures += 1;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("train.csv"),
        common::to_csv(&common::synthetic_rows(120, 1)),
    )
    .unwrap();
    fs::write(
        d.join("test.csv"),
        common::to_csv(&common::synthetic_rows(40, 2)),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut words: Vec<String> = common::synthetic_rows(120, 1)
        .into_iter()
        .flat_map(|(_, t, _)| n.preprocess_tokens(&t))
        .collect();
    words.sort();
    words.dedup();
    let mut vectors = format!("{} 6\n", words.len());
    for w in &words {
        vectors.push_str(w);
        for _ in 0..6 {
            vectors.push_str(&format!(" {:.4}", rng.gen_range(-1.0..1.0)));
        }
        vectors.push('\n');
    }
    fs::write(d.join("vectors.txt"), vectors).unwrap();
    fs::write(
        d.join("run.toml"),
        "version = 1\nseed = 13\n[paths]\ntrain = \"train.csv\"\ntest = \"test.csv\"\nembeddings = \"vectors.txt\"\n\
         [lstm]\nepochs = 3\n[lstm_shape]\ninput_dim = 6\nhidden = 6\nmax_seq_len = 16\n",
    )
    .unwrap();
    let runs = pipeline(d, "a").and_then(|_| pipeline(d, "b"));
    let (files, differing) = match &runs {
        Ok(()) => {
            let mut names: Vec<_> = fs::read_dir(d.join("a"))
                .unwrap()
                .map(|e| e.unwrap().file_name())
                .collect();
            names.sort();
            let differing: Vec<String> = names
                .iter()
                .filter(|f| {
                    fs::read(d.join("a").join(f)).ok() != fs::read(d.join("b").join(f)).ok()
                })
                .map(|f| f.to_string_lossy().into_owned())
                .collect();
            (names.len(), differing)
        }
        Err(_) => (0, Vec::new()),
    };
    let ok = failures == 0 && runs.is_ok() && differing.is_empty() && files > 0;
    line(
        "8",
        Status::of(ok),
        match runs {
            Ok(()) => format!(
                "fuzz {}/{FUZZ_CASES} strings total and stable; two seeded pipeline runs: {files} files, {} differing {:?}",
                FUZZ_CASES - failures,
                differing.len(),
                differing
            ),
            Err(e) => format!("pipeline run failed: {e}"),
        },
    )
}

fn main() {
    let official = official_data();
    let mut outcomes = vec![golden_rows(), oversampling(official.as_ref())];
    let (classical_lines, trained) = classical(official.as_ref());
    outcomes.extend(classical_lines);
    outcomes.push(nb_oracle());
    outcomes.push(gradients());
    outcomes.push(metric_identities());
    outcomes.push(keyword_fixture());
    outcomes.push(keyword_official(official.as_ref(), &trained));
    outcomes.push(fuzz_and_determinism());

    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    println!(
        "acceptance: {} pass, {} fail, {} warn, {} not run",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Warn),
        count(Status::NotRun)
    );
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.status == Status::Fail)
        .map(|o| format!("[{}] {}", o.id, o.detail))
        .collect();
    if !failed.is_empty() {
        eprintln!("failed criteria:\n{}", failed.join("\n"));
        std::process::exit(1);
    }
}
