mod common;

use common::oracles::{lstm_grad_check, lstm_unrolled_gap, random_inputs, random_lstm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sugmine::corpus::Label;
use sugmine::eval::ConfusionMatrix;
use sugmine::neural::{lstm_fit, EmbeddingTable, LstmClassifier, LstmHyperparameters, LstmShape};

#[test]
fn forward_matches_hand_unrolled_recurrence() {
    let worst = lstm_unrolled_gap(20);
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn bptt_matches_finite_differences() {
    let worst = lstm_grad_check(25);
    assert!(worst < 1e-3, "max relative error {worst:e}");
}

#[test]
fn padding_is_neutral() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_lstm(&mut rng, 3, 3);
        let len = 1 + (seed as usize % 5);
        let inputs = random_inputs(&mut rng, len, 3);
        let base = m.forward_vectors(&inputs).unwrap();
        for pad in 1..6 {
            let mut padded = vec![None; pad];
            padded.extend(inputs.iter().cloned());
            let p = m.forward_vectors(&padded).unwrap();
            assert_eq!(p.probability, base.probability);
            assert_eq!(p.final_hidden(), base.final_hidden());
            assert_eq!(p.steps(), len);
        }
    }
}

#[test]
fn padding_neutral_through_token_interface() {
    let mut table = EmbeddingTable::new(3);
    table.insert("a", &[0.1, 0.2, 0.3]);
    table.insert("b", &[-0.5, 0.0, 0.4]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut short = random_lstm(&mut rng, 3, 2);
    short.shape.max_seq_len = 3;
    let mut long = short.clone();
    long.shape.max_seq_len = 40;
    let toks = ["a", "b", "a"];
    assert_eq!(
        short.probability(&toks, &table).unwrap(),
        long.probability(&toks, &table).unwrap()
    );
}

const FILLER: [&str; 10] = [
    "the", "app", "is", "slow", "add", "dark", "mode", "menu", "crashes", "support",
];

fn please_task(seed: u64) -> (Vec<(Vec<String>, Label)>, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 8;
    let mut table = EmbeddingTable::new(dim);
    for w in FILLER.iter().chain(["please"].iter()) {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert(w, &v);
    }
    let mut data = Vec::new();
    for i in 0..40 {
        let len = rng.gen_range(3..7);
        let mut toks: Vec<String> = (0..len)
            .map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string())
            .collect();
        let pos = i % 2 == 0;
        if pos {
            let at = rng.gen_range(0..=toks.len());
            toks.insert(at, "please".to_string());
        }
        data.push((
            toks,
            if pos {
                Label::Suggestion
            } else {
                Label::NonSuggestion
            },
        ));
    }
    (data, table)
}

#[test]
fn learns_the_please_task() {
    let (data, table) = please_task(3);
    let model = LstmClassifier::new(
        LstmShape {
            input_dim: 8,
            hidden: 8,
            max_seq_len: 16,
        },
        3,
    );
    let hp = LstmHyperparameters {
        epochs: 30,
        learning_rate: 0.5,
        batch_size: 4,
        seed: 3,
        ..LstmHyperparameters::default()
    };
    let (model, log) = lstm_fit(model, &data, &table, &hp).unwrap();
    assert_eq!(log.epoch_loss.len(), 30);
    let pairs = data
        .iter()
        .map(|(t, y)| (*y, model.predict(t, &table).unwrap()));
    let f1 = ConfusionMatrix::from_pairs(pairs).metrics().f1;
    assert!(f1 >= 0.95, "train F1 {f1}");
}
