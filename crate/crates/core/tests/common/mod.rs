//! Synthetic forum-style corpora shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FEATURES: [&str; 12] = [
    "dark mode",
    "offline sync",
    "a search box",
    "keyboard shortcuts",
    "tile resizing",
    "export to pdf",
    "live tiles",
    "cloud backup",
    "multiple accounts",
    "a widget",
    "voice input",
    "push notifications",
];

const SUGGEST: [&str; 6] = [
    "Please add {} support",
    "It would be great to have {}",
    "You should add {} to the app",
    "Please consider {} for the next release",
    "I suggest adding {}",
    "Would be nice if there was {}",
];

const OTHER: [&str; 6] = [
    "The app crashes when I open {}",
    "I tried {} yesterday and it worked",
    "Thanks for the update, {} is fine",
    "My phone shows {} on the start screen",
    "Is {} available in my region?",
    "{} stopped working after the update",
];

/// `(id, text, label)` rows; about one in four is a suggestion.
pub fn synthetic_rows(n: usize, seed: u64) -> Vec<(String, String, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let feature = FEATURES[rng.gen_range(0..FEATURES.len())];
            let positive = i % 4 == 0;
            let template = if positive {
                SUGGEST[rng.gen_range(0..SUGGEST.len())]
            } else {
                OTHER[rng.gen_range(0..OTHER.len())]
            };
            (
                format!("s{i}"),
                template.replace("{}", feature),
                u8::from(positive),
            )
        })
        .collect()
}

pub fn to_csv(rows: &[(String, String, u8)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "sentence", "label"]).unwrap();
    for (id, text, label) in rows {
        w.write_record([id.as_str(), text.as_str(), &label.to_string()])
            .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub mod oracles;
