//! Skip-gram token embeddings with hashed character n-grams, and pooled
//! sequence vectors.

mod io;
mod train;

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{export_text, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use train::{train_embedder, EmbedTrainOutput};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary has {0} distinct tokens; at least 2 are required")]
    DegenerateVocab(usize),
    #[error("cannot embed an empty token sequence")]
    EmptySequence,
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
    #[error("model file format mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_token_count: usize,
    pub subwords_enabled: bool,
    pub min_ngram: usize,
    pub max_ngram: usize,
    pub buckets: usize,
    pub rng_seed: u64,
    /// 1 trains sequentially; more shards the corpus and averages the shard
    /// models after every epoch.
    pub threads: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.05,
            min_token_count: 1,
            subwords_enabled: true,
            min_ngram: 3,
            max_ngram: 6,
            buckets: 50_000,
            rng_seed: 42,
            threads: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        if self.subwords_enabled && (self.buckets == 0 || self.min_ngram == 0 || self.min_ngram > self.max_ngram) {
            return bad("subwords need buckets >= 1 and 1 <= min_ngram <= max_ngram");
        }
        Ok(())
    }
}

/// A fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Fails on an empty or non-finite vector.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(EmbeddingVector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Out-of-vocabulary bookkeeping for one [`embed_tokens_counted`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OovStats {
    /// Tokens missing from the vocabulary.
    pub oov: usize,
    /// Tokens that ended up with a zero vector (OOV without usable n-grams).
    pub zero: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderModel {
    pub(crate) vocab: Vec<String>,
    pub(crate) counts: Vec<u64>,
    pub(crate) index: HashMap<String, usize>,
    pub(crate) input: Array2<f32>,
    pub(crate) output: Array2<f32>,
    pub(crate) subwords: Option<Array2<f32>>,
    pub(crate) config: EmbedConfig,
}

impl EmbedderModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token_count(&self, token: &str) -> Option<u64> {
        self.index.get(token).map(|&i| self.counts[i])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn input_vectors(&self) -> &Array2<f32> {
        &self.input
    }

    pub fn output_vectors(&self) -> &Array2<f32> {
        &self.output
    }

    pub fn subword_buckets(&self) -> Option<&Array2<f32>> {
        self.subwords.as_ref()
    }

    /// Bucket rows for the character n-grams of `token`.
    pub fn subword_rows(&self, token: &str) -> Vec<usize> {
        match &self.subwords {
            Some(b) => char_ngram_buckets(token, self.config.min_ngram, self.config.max_ngram, b.nrows()),
            None => Vec::new(),
        }
    }

    /// Unnormalized vector of one token: the mean of its word row and n-gram
    /// rows when in vocabulary, the sum of n-gram rows otherwise. `None` when
    /// the token has no row at all.
    pub fn token_vector(&self, token: &str) -> Option<Vec<f32>> {
        let dim = self.dim();
        let mut acc = vec![0f32; dim];
        let add = |acc: &mut Vec<f32>, row: ArrayView1<f32>| {
            for (a, v) in acc.iter_mut().zip(row.iter()) {
                *a += *v;
            }
        };
        let ngrams = self.subword_rows(token);
        let buckets = self.subwords.as_ref();
        match self.index.get(token) {
            Some(&i) => {
                add(&mut acc, self.input.row(i));
                for &r in &ngrams {
                    add(&mut acc, buckets.expect("ngrams imply buckets").row(r));
                }
                let n = (1 + ngrams.len()) as f32;
                acc.iter_mut().for_each(|a| *a /= n);
                Some(acc)
            }
            None if !ngrams.is_empty() => {
                for &r in &ngrams {
                    add(&mut acc, buckets.expect("ngrams imply buckets").row(r));
                }
                Some(acc)
            }
            None => None,
        }
    }
}

/// FNV-1a over bytes, as used for n-gram bucketing.
pub(crate) fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

/// Buckets of the character n-grams (lengths `min_n..=max_n`) of `<token>`,
/// excluding the bracketed token itself.
pub(crate) fn char_ngram_buckets(token: &str, min_n: usize, max_n: usize, buckets: usize) -> Vec<usize> {
    let wrapped: Vec<char> = format!("<{token}>").chars().collect();
    let mut out = Vec::new();
    for start in 0..wrapped.len() {
        for n in min_n..=max_n {
            let end = start + n;
            if end > wrapped.len() {
                break;
            }
            if n == wrapped.len() {
                continue;
            }
            let gram: String = wrapped[start..end].iter().collect();
            out.push(fnv1a(gram.as_bytes()) as usize % buckets);
        }
    }
    out
}

/// Mean of the L2-normalized token vectors. Tokens whose vector is zero are
/// left out of the mean.
pub fn embed_tokens<S: AsRef<str>>(model: &EmbedderModel, tokens: &[S]) -> Result<EmbeddingVector, EmbedError> {
    embed_tokens_counted(model, tokens).map(|(v, _)| v)
}

pub fn embed_tokens_counted<S: AsRef<str>>(
    model: &EmbedderModel,
    tokens: &[S],
) -> Result<(EmbeddingVector, OovStats), EmbedError> {
    if tokens.is_empty() {
        return Err(EmbedError::EmptySequence);
    }
    let dim = model.dim();
    let mut sum = vec![0f64; dim];
    let mut used = 0usize;
    let mut stats = OovStats::default();
    for t in tokens {
        let t = t.as_ref();
        if !model.contains(t) {
            stats.oov += 1;
        }
        let Some(v) = model.token_vector(t) else {
            stats.zero += 1;
            continue;
        };
        let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += *x as f64 / norm;
            }
            used += 1;
        } else {
            stats.zero += 1;
        }
    }
    if used > 0 {
        sum.iter_mut().for_each(|s| *s /= used as f64);
    }
    Ok((EmbeddingVector { values: sum }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> EmbedderModel {
        let corpus: Vec<Vec<String>> = (0..20)
            .map(|i| {
                ["alpha", "beta", "gamma", "delta"]
                    .iter()
                    .cycle()
                    .skip(i % 4)
                    .take(6)
                    .map(|s| s.to_string())
                    .collect()
            })
            .collect();
        let cfg = EmbedConfig {
            dim: 8,
            epochs: 2,
            buckets: 64,
            ..Default::default()
        };
        train_embedder(&corpus, &cfg).unwrap().model
    }

    #[test]
    fn single_token_is_normalized_token_vector() {
        let m = toy_model();
        let v = embed_tokens(&m, &["alpha"]).unwrap();
        let raw = m.token_vector("alpha").unwrap();
        let n = raw.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        for (a, b) in v.values().iter().zip(&raw) {
            assert!((a - *b as f64 / n).abs() < 1e-12);
        }
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn repetition_does_not_change_the_mean() {
        let m = toy_model();
        let one = embed_tokens(&m, &["beta"]).unwrap();
        let many = embed_tokens(&m, &["beta"; 7]).unwrap();
        for (a, b) in one.values().iter().zip(many.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let m = toy_model();
        let empty: [&str; 0] = [];
        assert!(matches!(embed_tokens(&m, &empty), Err(EmbedError::EmptySequence)));
    }

    #[test]
    fn oov_uses_subwords_or_counts_zero() {
        let m = toy_model();
        let (v, stats) = embed_tokens_counted(&m, &["alphabet"]).unwrap();
        assert_eq!(stats, OovStats { oov: 1, zero: 0 });
        assert!(v.norm() > 0.0);

        let cfg = EmbedConfig {
            dim: 4,
            epochs: 1,
            subwords_enabled: false,
            ..Default::default()
        };
        let corpus = vec![vec!["a".to_string(), "b".to_string()]];
        let plain = train_embedder(&corpus, &cfg).unwrap().model;
        let (v, stats) = embed_tokens_counted(&plain, &["zzz"]).unwrap();
        assert_eq!(stats, OovStats { oov: 1, zero: 1 });
        assert_eq!(v.values(), &[0.0; 4]);
    }

    #[test]
    fn ngrams_exclude_whole_word() {
        // "<ab>" has 4 chars: grams of length 3 only ("<ab", "ab>"); length 4 is the word.
        assert_eq!(char_ngram_buckets("ab", 3, 6, 1 << 20).len(), 2);
        assert!(char_ngram_buckets("a", 3, 6, 1 << 20).is_empty());
    }
}
