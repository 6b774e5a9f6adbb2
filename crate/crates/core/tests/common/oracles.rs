//! Independent reference computations shared by the oracle tests and the
//! acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sugmine::corpus::Label;
use sugmine::features::SparseVector;
use sugmine::linear::{logistic_objective, nb_fit, svm_objective, NBModel};
use sugmine::neural::{LstmClassifier, LstmShape};

pub fn lab(b: bool) -> Label {
    if b {
        Label::Suggestion
    } else {
        Label::NonSuggestion
    }
}

pub fn sv(counts: &[u32]) -> SparseVector {
    SparseVector::from_pairs(
        counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (i as u32, f64::from(*c))),
    )
}

/// Posterior over [non_suggestion, suggestion] from raw counts, using
/// products of probabilities rather than log sums.
pub fn nb_oracle(docs: &[Vec<u32>], labels: &[bool], alpha: f64, query: &[u32]) -> [f64; 2] {
    let v = query.len();
    let mut joint = [0.0f64; 2];
    for (slot, class) in [false, true].into_iter().enumerate() {
        let members: Vec<&Vec<u32>> = docs
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == class)
            .map(|(d, _)| d)
            .collect();
        let prior = members.len() as f64 / docs.len() as f64;
        let total: u32 = members.iter().flat_map(|d| d.iter()).sum();
        let mut p = prior;
        for (t, &x) in query.iter().enumerate() {
            let count: u32 = members.iter().map(|d| d[t]).sum();
            let theta = (f64::from(count) + alpha) / (f64::from(total) + alpha * v as f64);
            p *= theta.powi(x as i32);
        }
        joint[slot] = p;
    }
    let z = joint[0] + joint[1];
    [(joint[0] / z).ln(), (joint[1] / z).ln()]
}

/// Largest log-posterior gap between the fitted model and the oracle over
/// the training documents and `queries`.
pub fn nb_gap(docs: &[Vec<u32>], labels: &[bool], alpha: f64, queries: &[Vec<u32>]) -> f64 {
    let x: Vec<SparseVector> = docs.iter().map(|d| sv(d)).collect();
    let y: Vec<Label> = labels.iter().map(|&b| lab(b)).collect();
    let m: NBModel = nb_fit(&x, &y, docs[0].len(), alpha).unwrap();
    let mut worst = 0.0f64;
    for q in queries.iter().chain(docs) {
        let got = m.log_posterior(&sv(q));
        let want = nb_oracle(docs, labels, alpha, q);
        for k in 0..2 {
            worst = worst.max((got[k] - want[k]).abs());
        }
    }
    worst
}

/// Sweeps corpora of 2..=5 documents over 1..=6 terms. Shapes whose {0,1}
/// count space has at most 4096 corpora are enumerated in full; larger
/// shapes get 300 seeded corpora with counts up to 3. Label patterns cycle
/// through every assignment with both classes present. Returns the number
/// of corpora checked and the worst gap.
pub fn nb_sweep() -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for n_docs in 2..=5usize {
        for n_terms in 1..=6usize {
            let per_doc = 1usize << n_terms;
            let space = per_doc.pow(n_docs as u32);
            let label_patterns: Vec<Vec<bool>> = (1..(1u32 << n_docs) - 1)
                .map(|bits| (0..n_docs).map(|i| bits >> i & 1 == 1).collect())
                .collect();
            let mut queries: Vec<Vec<u32>> = Vec::new();
            for _ in 0..3 {
                queries.push((0..n_terms).map(|_| rng.gen_range(0..4)).collect());
            }
            let corpora: Vec<Vec<Vec<u32>>> = if space <= 4096 {
                (0..space)
                    .map(|mut code| {
                        (0..n_docs)
                            .map(|_| {
                                let d = code % per_doc;
                                code /= per_doc;
                                (0..n_terms).map(|t| (d >> t & 1) as u32).collect()
                            })
                            .collect()
                    })
                    .collect()
            } else {
                let mut sampled = Vec::with_capacity(300);
                for _ in 0..300 {
                    let mut docs = Vec::with_capacity(n_docs);
                    for _ in 0..n_docs {
                        docs.push((0..n_terms).map(|_| rng.gen_range(0..4)).collect());
                    }
                    sampled.push(docs);
                }
                sampled
            };
            for docs in &corpora {
                let labels = &label_patterns[checked % label_patterns.len()];
                let alpha = if checked.is_multiple_of(2) { 1.0 } else { 0.5 };
                worst = worst.max(nb_gap(docs, labels, alpha, &queries));
                checked += 1;
            }
        }
    }
    (checked, worst)
}

pub fn random_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
) -> (Vec<SparseVector>, Vec<Label>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let mut pairs: Vec<(u32, f64)> = Vec::new();
        for j in 0..dim as u32 {
            if rng.gen_bool(0.6) {
                pairs.push((j, rng.gen_range(-2.0..2.0)));
            }
        }
        x.push(SparseVector::from_pairs(pairs));
        y.push(lab(i % 2 == 0 || rng.gen_bool(0.3)));
    }
    (x, y)
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

type Objective = fn(&[f64], f64, &[SparseVector], &[Label], f64) -> (f64, Vec<f64>, f64);

fn logistic(w: &[f64], b: f64, x: &[SparseVector], y: &[Label], l2: f64) -> (f64, Vec<f64>, f64) {
    let o = logistic_objective(w, b, x, y, l2);
    (o.loss, o.grad_weights, o.grad_bias)
}

fn hinge(w: &[f64], b: f64, x: &[SparseVector], y: &[Label], l2: f64) -> (f64, Vec<f64>, f64) {
    let o = svm_objective(w, b, x, y, l2);
    (o.loss, o.grad_weights, o.grad_bias)
}

fn near_kink(w: &[f64], b: f64, x: &[SparseVector], y: &[Label]) -> bool {
    x.iter().zip(y).any(|(xi, yi)| {
        let s = if yi.is_positive() { 1.0 } else { -1.0 };
        (s * (xi.dot_dense(w) + b) - 1.0).abs() < 1e-3
    })
}

fn grad_check(seeds: u64, h: f64, f: Objective, skip_kinks: bool) -> (usize, f64) {
    let mut worst = 0.0f64;
    let mut used = 0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.gen_range(1..6);
        let n = rng.gen_range(2..9);
        let (x, y) = random_problem(&mut rng, n, dim);
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        if skip_kinks && near_kink(&w, b, &x, &y) {
            continue;
        }
        used += 1;
        let l2 = [0.0, 1e-4, 0.1][seed as usize % 3];
        let (_, gw, gb) = f(&w, b, &x, &y, l2);
        for j in 0..dim {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let num = (f(&wp, b, &x, &y, l2).0 - f(&wm, b, &x, &y, l2).0) / (2.0 * h);
            worst = worst.max(rel_err(gw[j], num, 1e-5));
        }
        let num = (f(&w, b + h, &x, &y, l2).0 - f(&w, b - h, &x, &y, l2).0) / (2.0 * h);
        worst = worst.max(rel_err(gb, num, 1e-5));
    }
    (used, worst)
}

/// Seeds checked and worst relative error of the logistic gradient.
pub fn logistic_grad_check(seeds: u64) -> (usize, f64) {
    grad_check(seeds, 1e-6, logistic, false)
}

/// As [`logistic_grad_check`], skipping points within 1e-3 of a hinge kink.
pub fn svm_grad_check(seeds: u64) -> (usize, f64) {
    grad_check(seeds, 1e-5, hinge, true)
}

pub fn random_lstm(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize) -> LstmClassifier {
    let shape = LstmShape {
        input_dim,
        hidden,
        max_seq_len: 8,
    };
    let mut m = LstmClassifier::new(shape, rng.gen());
    for k in 0..m.parameter_count() {
        let v = rng.gen_range(-0.8..0.8);
        m.set_parameter(k, v);
    }
    m
}

pub fn random_inputs(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(Some((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    }
    out
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Two hidden units, three inputs, every gate written out by hand.
pub fn unrolled_probability(m: &LstmClassifier, xs: &[[f64; 3]]) -> f64 {
    let w = |row: usize, col: usize| m.gate_weights[row * 5 + col];
    let b = &m.gate_bias;
    let (mut h0, mut h1, mut c0, mut c1) = (0.0, 0.0, 0.0, 0.0);
    for x in xs {
        let pre = |row: usize| {
            b[row]
                + w(row, 0) * x[0]
                + w(row, 1) * x[1]
                + w(row, 2) * x[2]
                + w(row, 3) * h0
                + w(row, 4) * h1
        };
        let i0 = sig(pre(0));
        let i1 = sig(pre(1));
        let f0 = sig(pre(2));
        let f1 = sig(pre(3));
        let o0 = sig(pre(4));
        let o1 = sig(pre(5));
        let g0 = pre(6).tanh();
        let g1 = pre(7).tanh();
        c0 = f0 * c0 + i0 * g0;
        c1 = f1 * c1 + i1 * g1;
        h0 = o0 * c0.tanh();
        h1 = o1 * c1.tanh();
    }
    sig(m.out_weights[0] * h0 + m.out_weights[1] * h1 + m.out_bias)
}

/// Worst gap between the model's forward pass and the hand-unrolled one.
pub fn lstm_unrolled_gap(seeds: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_lstm(&mut rng, 3, 2);
        let len = 1 + (seed as usize % 5);
        let mut xs: Vec<[f64; 3]> = Vec::with_capacity(len);
        for _ in 0..len {
            xs.push([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
        }
        let inputs: Vec<Option<Vec<f64>>> = xs.iter().map(|x| Some(x.to_vec())).collect();
        let got = m.forward_vectors(&inputs).unwrap().probability;
        worst = worst.max((got - unrolled_probability(&m, &xs)).abs());
    }
    worst
}

fn lstm_loss(m: &LstmClassifier, inputs: &[Option<Vec<f64>>], y: Label) -> f64 {
    LstmClassifier::loss(m.forward_vectors(inputs).unwrap().probability, y)
}

/// Worst relative error of BPTT against central differences (step 1e-4)
/// over every parameter, sequence lengths 1..=5.
pub fn lstm_grad_check(seeds: u64) -> f64 {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = rng.gen_range(2..5);
        let m = random_lstm(&mut rng, 3, hidden);
        let len = 1 + (seed as usize % 5);
        let inputs = random_inputs(&mut rng, len, 3);
        let y = lab(seed % 2 == 0);
        let cache = m.forward_vectors(&inputs).unwrap();
        let analytic = m.backward(&cache, y).flatten();
        let params = m.parameters();
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = m.clone();
            plus.set_parameter(k, params[k] + h);
            let mut minus = m.clone();
            minus.set_parameter(k, params[k] - h);
            let num = (lstm_loss(&plus, &inputs, y) - lstm_loss(&minus, &inputs, y)) / (2.0 * h);
            worst = worst.max(rel_err(a, num, 1e-4));
        }
    }
    worst
}
