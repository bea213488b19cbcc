//! Attentional LSTM encoder-decoder that maps query tokens to target tokens
//! (non-terminal representations, or code tokens for the baseline corpus).

mod checkpoint;
mod decode;
mod network;
mod params;
mod train;
mod vocab;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Split;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decode::{attention_weights, translate, Translation};
pub use params::{LstmLayer, Params};
pub use train::{
    batch_loss, batch_loss_and_grads, train_translator, train_translator_with, TrainLog, TrainOptions, TrainOutcome,
};
pub use vocab::{Vocab, BOS, EOS, PAD, SPECIALS, UNK};

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("training split is empty")]
    EmptyCorpus,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss diverged at step {step}")]
    DivergedLoss { step: usize },
    #[error("invalid translator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parallel corpus: {0}")]
    InvalidCorpus(String),
    #[error("checkpoint format mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// Bilinear score `h_t^T W h_s`.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "width")]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub hidden_units: usize,
    pub embedding_dim: usize,
    pub cell: CellKind,
    pub attention: AttentionKind,
    pub train_steps: usize,
    pub validate_every: usize,
    pub checkpoint_every: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub lr_decay: f64,
    pub start_decay_step: usize,
    pub decay_every: usize,
    pub param_init: f64,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    pub rng_seed: u64,
    pub decode: DecodeMode,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl Seq2SeqConfig {
    /// Full-size profile: 2+2 layers of 500 units, 100k steps.
    pub fn paper() -> Self {
        Seq2SeqConfig {
            encoder_layers: 2,
            decoder_layers: 2,
            hidden_units: 500,
            embedding_dim: 500,
            cell: CellKind::Lstm,
            attention: AttentionKind::General,
            train_steps: 100_000,
            validate_every: 1000,
            checkpoint_every: 10_000,
            batch_size: 64,
            learning_rate: 1.0,
            max_grad_norm: 5.0,
            lr_decay: 0.5,
            start_decay_step: 50_000,
            decay_every: 10_000,
            param_init: 0.1,
            max_source_len: 50,
            max_target_len: 400,
            src_vocab_size: 50_000,
            tgt_vocab_size: 50_000,
            rng_seed: 3435,
            decode: DecodeMode::Greedy,
        }
    }

    /// CPU-sized profile used for the bundled corpus.
    pub fn desk() -> Self {
        Seq2SeqConfig {
            hidden_units: 64,
            embedding_dim: 64,
            train_steps: 1500,
            validate_every: 250,
            checkpoint_every: 500,
            batch_size: 16,
            start_decay_step: 1000,
            decay_every: 250,
            max_source_len: 30,
            max_target_len: 100,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<(), TranslatorError> {
        let bad = |m: String| Err(TranslatorError::InvalidConfig(m));
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("layers must be >= 1".into());
        }
        if self.hidden_units == 0 || self.embedding_dim == 0 {
            return bad("hidden_units and embedding_dim must be >= 1".into());
        }
        if self.validate_every == 0 || self.checkpoint_every == 0 || self.decay_every == 0 {
            return bad("validate_every, checkpoint_every and decay_every must be >= 1".into());
        }
        if self.train_steps < self.validate_every {
            return bad(format!(
                "train_steps ({}) must be >= validate_every ({})",
                self.train_steps, self.validate_every
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.src_vocab_size < SPECIALS.len() || self.tgt_vocab_size < SPECIALS.len() {
            return bad("vocabulary caps must be >= 4".into());
        }
        if self.max_source_len == 0 || self.max_target_len == 0 {
            return bad("length caps must be >= 1".into());
        }
        if [self.learning_rate, self.max_grad_norm, self.param_init]
            .iter()
            .any(|v| v.is_nan() || *v <= 0.0)
        {
            return bad("learning_rate, max_grad_norm and param_init must be > 0".into());
        }
        if let DecodeMode::Beam(0) = self.decode {
            return bad("beam width must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub split: Split,
}

/// Aligned (source, target) token sequences tagged with their split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub pairs: Vec<ParallelPair>,
}

impl ParallelCorpus {
    /// Checks the non-empty-sides and unique-id invariants.
    pub fn new(pairs: Vec<ParallelPair>) -> Result<Self, TranslatorError> {
        let mut ids = HashSet::new();
        for p in &pairs {
            if p.source.is_empty() || p.target.is_empty() {
                return Err(TranslatorError::InvalidCorpus(format!(
                    "pair {} has an empty side",
                    p.id
                )));
            }
            if !ids.insert(p.id.as_str()) {
                return Err(TranslatorError::InvalidCorpus(format!("duplicate pair id {}", p.id)));
            }
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ParallelPair> {
        self.pairs.iter().filter(move |p| p.split == split)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationModel {
    pub params: Params,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub config: Seq2SeqConfig,
}

impl TranslationModel {
    /// Freshly initialized model (uniform in `±param_init`).
    pub fn initialize(config: Seq2SeqConfig, src_vocab: Vocab, tgt_vocab: Vocab) -> Result<Self, TranslatorError> {
        use rand::SeedableRng;
        config.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.rng_seed);
        let params = Params::init_uniform(&config, src_vocab.len(), tgt_vocab.len(), config.param_init, &mut rng);
        let model = TranslationModel {
            params,
            src_vocab,
            tgt_vocab,
            config,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn check_shapes(&self) -> Result<(), TranslatorError> {
        let expected = Params::zeros(&self.config, self.src_vocab.len(), self.tgt_vocab.len());
        for (i, (a, b)) in self.params.tensors().iter().zip(expected.tensors()).enumerate() {
            if a.dim() != b.dim() {
                return Err(TranslatorError::ShapeMismatch(format!(
                    "tensor {i}: have {:?}, expected {:?}",
                    a.dim(),
                    b.dim()
                )));
            }
        }
        if self.params.tensors().len() != expected.tensors().len() {
            return Err(TranslatorError::ShapeMismatch("tensor count differs".into()));
        }
        Ok(())
    }
}

/// Whitespace tokenization; `lowercase` for natural-language queries.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}
