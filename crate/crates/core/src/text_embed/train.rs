use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{char_ngram_buckets, EmbedConfig, EmbedError, EmbedderModel};

/// Trained model plus the mean negative-sampling loss of every epoch.
#[derive(Debug, Clone)]
pub struct EmbedTrainOutput {
    pub model: EmbedderModel,
    pub epoch_losses: Vec<f64>,
}

fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> (Vec<String>, Vec<u64>) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for t in seq {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c as usize >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(t, c)| (t.to_string(), c)).unzip()
}

struct Trainer<'a> {
    model: EmbedderModel,
    /// Per-token input rows: word index, then bucket indices offset by vocab size.
    rows: Vec<Vec<usize>>,
    negatives: &'a WeightedIndex<f64>,
    hidden: Array1<f32>,
    grad: Array1<f32>,
}

impl Trainer<'_> {
    fn input_row(&self, r: usize) -> ndarray::ArrayView1<'_, f32> {
        let v = self.model.vocab.len();
        if r < v {
            self.model.input.row(r)
        } else {
            self.model.subwords.as_ref().expect("bucket row").row(r - v)
        }
    }

    fn add_to_input_row(&mut self, r: usize, delta: &Array1<f32>) {
        let v = self.model.vocab.len();
        let mut row = if r < v {
            self.model.input.row_mut(r)
        } else {
            self.model.subwords.as_mut().expect("bucket row").row_mut(r - v)
        };
        row += delta;
    }

    fn binary_logistic(&mut self, target: usize, label: bool, lr: f32) -> f64 {
        let out = self.model.output.row(target);
        let score = out.dot(&self.hidden);
        let p = 1.0 / (1.0 + (-score).exp());
        let alpha = lr * (if label { 1.0 } else { 0.0 } - p);
        self.grad.scaled_add(alpha, &out);
        let hidden = self.hidden.clone();
        self.model.output.row_mut(target).scaled_add(alpha, &hidden);
        let p = p as f64;
        if label {
            -(p.max(1e-12)).ln()
        } else {
            -((1.0 - p).max(1e-12)).ln()
        }
    }

    /// One center/context update; returns its loss.
    fn update(&mut self, center: usize, context: usize, lr: f32, rng: &mut ChaCha8Rng) -> f64 {
        let rows = std::mem::take(&mut self.rows[center]);
        self.hidden.fill(0.0);
        for &r in &rows {
            let row = self.input_row(r).to_owned();
            self.hidden += &row;
        }
        self.hidden /= rows.len() as f32;
        self.grad.fill(0.0);

        let mut loss = self.binary_logistic(context, true, lr);
        let vocab = self.model.vocab.len();
        for _ in 0..self.model.config.negative_samples {
            let mut neg = self.negatives.sample(rng);
            let mut tries = 0;
            while neg == context && tries < 10 && vocab > 1 {
                neg = self.negatives.sample(rng);
                tries += 1;
            }
            if neg == context {
                continue;
            }
            loss += self.binary_logistic(neg, false, lr);
        }
        let grad = self.grad.clone();
        for &r in &rows {
            self.add_to_input_row(r, &grad);
        }
        self.rows[center] = rows;
        loss
    }

    /// Trains over `sentences`; `lr_at(processed)` gives the current rate.
    fn epoch(
        &mut self,
        sentences: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
        lr_at: impl Fn(usize) -> f32,
    ) -> (f64, usize, usize) {
        let window = self.model.config.window;
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut processed = 0usize;
        let span = Uniform::new_inclusive(1, window);
        for sent in sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = lr_at(processed);
                let b = span.sample(rng);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(sent.len() - 1);
                for (c, &context) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if c != pos {
                        loss_sum += self.update(center, context, lr, rng);
                        updates += 1;
                    }
                }
                processed += 1;
            }
        }
        (loss_sum, updates, processed)
    }
}

/// Skip-gram with negative sampling.
///
/// With `threads == 1` the run is fully determined by `rng_seed`. With more
/// threads every epoch trains one model copy per contiguous corpus shard and
/// averages the copies afterwards (still seeded, but not identical to the
/// sequential result).
pub fn train_embedder(corpus: &[Vec<String>], config: &EmbedConfig) -> Result<EmbedTrainOutput, EmbedError> {
    config.validate()?;
    if corpus.is_empty() || corpus.iter().all(|s| s.is_empty()) {
        return Err(EmbedError::EmptyCorpus);
    }
    let (vocab, counts) = build_vocab(corpus, config.min_token_count);
    if vocab.len() < 2 {
        return Err(EmbedError::DegenerateVocab(vocab.len()));
    }
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let dim = config.dim;
    let bound = 1.0 / dim as f32;
    let init = Uniform::new_inclusive(-bound, bound);
    let input = Array2::from_shape_simple_fn((vocab.len(), dim), || init.sample(&mut rng));
    let subwords = config
        .subwords_enabled
        .then(|| Array2::from_shape_simple_fn((config.buckets, dim), || init.sample(&mut rng)));
    let output = Array2::zeros((vocab.len(), dim));

    let rows: Vec<Vec<usize>> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = vec![i];
            if config.subwords_enabled {
                r.extend(
                    char_ngram_buckets(t, config.min_ngram, config.max_ngram, config.buckets)
                        .into_iter()
                        .map(|b| b + vocab.len()),
                );
            }
            r
        })
        .collect();

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t).copied()).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).sqrt()).collect();
    let negatives = WeightedIndex::new(&weights).expect("positive counts");

    let model = EmbedderModel {
        vocab,
        counts,
        index,
        input,
        output,
        subwords,
        config: config.clone(),
    };
    let mut trainer = Trainer {
        model,
        rows,
        negatives: &negatives,
        hidden: Array1::zeros(dim),
        grad: Array1::zeros(dim),
    };

    let tokens_per_epoch: usize = sentences.iter().map(|s| s.len()).sum();
    let total = (tokens_per_epoch * config.epochs).max(1);
    let base_lr = config.learning_rate as f32;
    let lr_at = |done: usize| base_lr * (1.0 - done as f32 / total as f32).max(1e-4);

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let offset = epoch * tokens_per_epoch;
        let (loss, updates) = if config.threads <= 1 || sentences.len() < 2 {
            let (l, u, _) = trainer.epoch(&sentences, &mut rng, |p| lr_at(offset + p));
            (l, u)
        } else {
            sharded_epoch(&mut trainer, &sentences, &mut rng, offset, &lr_at)
        };
        let mean = if updates > 0 { loss / updates as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(EmbedError::InvalidConfig(format!(
                "training diverged in epoch {epoch}; lower the learning rate"
            )));
        }
        log::debug!("embedder epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }

    Ok(EmbedTrainOutput {
        model: trainer.model,
        epoch_losses,
    })
}

fn sharded_epoch(
    trainer: &mut Trainer<'_>,
    sentences: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
    offset: usize,
    lr_at: &(impl Fn(usize) -> f32 + Sync),
) -> (f64, usize) {
    let shards = trainer.model.config.threads.min(sentences.len());
    let chunk = sentences.len().div_ceil(shards);
    let seeds: Vec<u64> = (0..shards).map(|_| rng.gen()).collect();
    let results: Vec<(EmbedderModel, f64, usize)> = std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .zip(&seeds)
            .map(|(part, &seed)| {
                let mut local = Trainer {
                    model: trainer.model.clone(),
                    rows: trainer.rows.clone(),
                    negatives: trainer.negatives,
                    hidden: trainer.hidden.clone(),
                    grad: trainer.grad.clone(),
                };
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let scale = shards;
                    let (l, u, _) = local.epoch(part, &mut rng, |p| lr_at(offset + p * scale));
                    (local.model, l, u)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("shard panicked")).collect()
    });

    let n = results.len() as f32;
    let m = &mut trainer.model;
    m.input.fill(0.0);
    m.output.fill(0.0);
    if let Some(b) = m.subwords.as_mut() {
        b.fill(0.0);
    }
    let mut loss = 0.0;
    let mut updates = 0;
    for (local, l, u) in results {
        m.input.scaled_add(1.0 / n, &local.input);
        m.output.scaled_add(1.0 / n, &local.output);
        if let (Some(dst), Some(src)) = (m.subwords.as_mut(), local.subwords.as_ref()) {
            dst.scaled_add(1.0 / n, src);
        }
        loss += l;
        updates += u;
    }
    (loss, updates)
}
