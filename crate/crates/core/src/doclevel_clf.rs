//! Document-level bag-of-n-grams classifier.
//!
//! Unigrams and adjacent bigrams are hashed into a fixed number of buckets,
//! their embeddings averaged into a hidden vector, and a linear softmax layer
//! maps that vector to class probabilities. Training is plain SGD on the
//! cross-entropy with a linearly decaying learning rate.
//!
//! Embedding rows start as seeded uniform noise in `[-1/dim, 1/dim]`. Each
//! row's initial value is a pure function of `(seed, bucket)`, so the model
//! only stores rows that training touched.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::util::derive_seed;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bucket ids for every unigram followed by every adjacent bigram.
pub fn ngram_ids<S: AsRef<str>>(tokens: &[S], bucket_count: u64) -> Vec<u64> {
    assert!(bucket_count >= 1, "bucket_count must be positive");
    let mut ids: Vec<u64> = tokens
        .iter()
        .map(|t| fnv1a64(t.as_ref().as_bytes()) % bucket_count)
        .collect();
    for w in tokens.windows(2) {
        let bigram = format!("{} {}", w[0].as_ref(), w[1].as_ref());
        ids.push(fnv1a64(bigram.as_bytes()) % bucket_count);
    }
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocClfParams {
    pub dim: usize,
    pub bucket_count: u64,
    pub epochs: usize,
    pub lr0: f64,
}

impl Default for DocClfParams {
    fn default() -> Self {
        DocClfParams {
            dim: 16,
            bucket_count: 1 << 18,
            epochs: 5,
            lr0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocClfModel {
    pub dim: usize,
    pub bucket_count: u64,
    pub n_classes: usize,
    pub seed: u64,
    /// Trained embedding rows, ascending by bucket.
    #[serde(serialize_with = "short_f32::rows")]
    rows: Vec<(u64, Vec<f32>)>,
    /// `n_classes` rows of `dim` output weights.
    #[serde(serialize_with = "short_f32::matrix")]
    output: Vec<Vec<f32>>,
}

/// Writes each `f32` as the shortest decimal that reads back to it,
/// instead of the longer expansion of its `f64` widening.
mod short_f32 {
    use serde::Serializer;

    fn widen(row: &[f32]) -> Vec<f64> {
        row.iter()
            .map(|v| v.to_string().parse::<f64>().expect("f32 display parses"))
            .collect()
    }

    pub fn rows<S: Serializer>(rows: &[(u64, Vec<f32>)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rows.iter().map(|(b, r)| (*b, widen(r))))
    }

    pub fn matrix<S: Serializer>(m: &[Vec<f32>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|r| widen(r)))
    }
}

fn init_row(seed: u64, bucket: u64, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, bucket));
    let bound = 1.0 / dim as f32;
    (0..dim).map(|_| rng.gen_range(-bound..=bound)).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn hidden_from<'a>(
    ids: &[u64],
    dim: usize,
    mut row: impl FnMut(u64) -> std::borrow::Cow<'a, [f32]>,
) -> Vec<f32> {
    let mut h = vec![0f32; dim];
    for &id in ids {
        for (hj, rj) in h.iter_mut().zip(row(id).iter()) {
            *hj += *rj;
        }
    }
    let n = ids.len() as f32;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

fn probs_from(hidden: &[f32], output: &[Vec<f32>]) -> Vec<f64> {
    let logits: Vec<f64> = output
        .iter()
        .map(|w| {
            w.iter()
                .zip(hidden)
                .map(|(a, b)| *a as f64 * *b as f64)
                .sum()
        })
        .collect();
    softmax(&logits)
}

impl DocClfModel {
    /// A model before any update: zero output weights.
    pub fn untrained(n_classes: usize, params: &DocClfParams, seed: u64) -> Self {
        DocClfModel {
            dim: params.dim,
            bucket_count: params.bucket_count,
            n_classes,
            seed,
            rows: Vec::new(),
            output: vec![vec![0.0; params.dim]; n_classes],
        }
    }

    fn row(&self, bucket: u64) -> std::borrow::Cow<'_, [f32]> {
        match self.rows.binary_search_by_key(&bucket, |r| r.0).ok() {
            Some(i) => std::borrow::Cow::Borrowed(&self.rows[i].1),
            None => std::borrow::Cow::Owned(init_row(self.seed, bucket, self.dim)),
        }
    }

    pub fn trained_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let ids = ngram_ids(tokens, self.bucket_count);
        if ids.is_empty() {
            return vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        let h = hidden_from(&ids, self.dim, |b| self.row(b));
        probs_from(&h, &self.output)
    }

    pub fn predict_proba(&self, doc: &Document) -> Vec<f64> {
        let toks: Vec<&str> = doc.surfaces().collect();
        self.predict_tokens(&toks)
    }

    /// Mean cross-entropy of the true classes.
    pub fn cross_entropy(&self, examples: &[(&Document, usize)]) -> f64 {
        let total: f64 = examples
            .iter()
            .map(|(d, c)| -self.predict_proba(d)[*c].max(1e-300).ln())
            .sum();
        total / examples.len() as f64
    }
}

/// `(met, not_met)` probabilities of a binary per-label classifier.
pub fn doc_class_probs(model: &DocClfModel, doc: &Document) -> (f64, f64) {
    let p = model.predict_proba(doc);
    (p[0], p[1])
}

struct Trainer {
    dim: usize,
    seed: u64,
    rows: HashMap<u64, Vec<f32>>,
    output: Vec<Vec<f32>>,
}

impl Trainer {
    fn ensure_rows(&mut self, ids: &[u64]) {
        for &id in ids {
            let (seed, dim) = (self.seed, self.dim);
            self.rows
                .entry(id)
                .or_insert_with(|| init_row(seed, id, dim));
        }
    }

    fn step(&mut self, ids: &[u64], class: usize, lr: f32) {
        if ids.is_empty() {
            return;
        }
        self.ensure_rows(ids);
        let rows = &self.rows;
        let hidden = hidden_from(ids, self.dim, |b| {
            std::borrow::Cow::Borrowed(rows[&b].as_slice())
        });
        let p = probs_from(&hidden, &self.output);
        let mut grad_hidden = vec![0f32; self.dim];
        for (c, out) in self.output.iter_mut().enumerate() {
            let g = (p[c] - if c == class { 1.0 } else { 0.0 }) as f32;
            for j in 0..self.dim {
                grad_hidden[j] += g * out[j];
                out[j] -= lr * g * hidden[j];
            }
        }
        let scale = lr / ids.len() as f32;
        for id in ids {
            let row = self.rows.get_mut(id).expect("row initialized above");
            for (r, g) in row.iter_mut().zip(&grad_hidden) {
                *r -= scale * g;
            }
        }
    }

    fn snapshot(&self, n_classes: usize, bucket_count: u64) -> DocClfModel {
        let rows: BTreeMap<u64, Vec<f32>> =
            self.rows.iter().map(|(k, v)| (*k, v.clone())).collect();
        DocClfModel {
            dim: self.dim,
            bucket_count,
            n_classes,
            seed: self.seed,
            rows: rows.into_iter().collect(),
            output: self.output.clone(),
        }
    }
}

fn fit(
    examples: &[(&Document, usize)],
    n_classes: usize,
    params: &DocClfParams,
    seed: u64,
    record_history: bool,
) -> Result<(DocClfModel, Vec<f64>)> {
    if n_classes < 2 {
        return Err(Error::InvalidInput("need at least two classes".into()));
    }
    if params.dim == 0 || params.bucket_count == 0 {
        return Err(Error::InvalidInput(
            "dim and bucket_count must be positive".into(),
        ));
    }
    let mut counts = vec![0usize; n_classes];
    for (_, c) in examples {
        if *c >= n_classes {
            return Err(Error::InvalidInput(format!("class {c} out of range")));
        }
        counts[*c] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::DegenerateLabels(format!("class counts {counts:?}")));
    }

    let ids: Vec<Vec<u64>> = examples
        .iter()
        .map(|(d, _)| ngram_ids(&d.surfaces().collect::<Vec<_>>(), params.bucket_count))
        .collect();
    let mut trainer = Trainer {
        dim: params.dim,
        seed,
        rows: HashMap::new(),
        output: vec![vec![0.0; params.dim]; n_classes],
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let total = (params.epochs * examples.len()) as f64;
    let mut t = 0usize;
    let mut history = Vec::new();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let lr = (params.lr0 * (1.0 - t as f64 / total)) as f32;
            trainer.step(&ids[i], examples[i].1, lr);
            t += 1;
        }
        if record_history {
            history.push(
                trainer
                    .snapshot(n_classes, params.bucket_count)
                    .cross_entropy(examples),
            );
        }
    }
    Ok((trainer.snapshot(n_classes, params.bucket_count), history))
}

/// Trains on `(document, class)` pairs; deterministic given `seed`.
pub fn train_doc_classifier(
    examples: &[(&Document, usize)],
    n_classes: usize,
    params: &DocClfParams,
    seed: u64,
) -> Result<DocClfModel> {
    fit(examples, n_classes, params, seed, false).map(|(m, _)| m)
}

/// Like [`train_doc_classifier`], also returning the training
/// cross-entropy measured after each epoch.
pub fn train_with_history(
    examples: &[(&Document, usize)],
    n_classes: usize,
    params: &DocClfParams,
    seed: u64,
) -> Result<(DocClfModel, Vec<f64>)> {
    fit(examples, n_classes, params, seed, true)
}

/// Binary per-label classifier: class 0 is `met`, class 1 is `not met`.
pub fn train_binary(
    docs: &[&Document],
    met: &[bool],
    params: &DocClfParams,
    seed: u64,
) -> Result<DocClfModel> {
    let examples: Vec<(&Document, usize)> = docs
        .iter()
        .zip(met)
        .map(|(d, m)| (*d, if *m { 0 } else { 1 }))
        .collect();
    train_doc_classifier(&examples, 2, params, seed)
}
