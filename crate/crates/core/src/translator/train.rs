use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{loss_and_grads, Batch};
use super::params::Params;
use super::vocab::Vocab;
use super::{save_checkpoint, ParallelCorpus, Seq2SeqConfig, TranslationModel, TranslatorError};
use crate::corpus::Split;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where scheduled checkpoints go; `None` skips writing them.
    pub checkpoint_dir: Option<PathBuf>,
    /// Log a progress line every this many steps (0 = never).
    pub log_every: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// `(step, loss per target token)` for every optimizer step.
    pub train_loss: Vec<(usize, f64)>,
    /// `(step, validation loss per target token)`.
    pub valid_loss: Vec<(usize, f64)>,
    pub best_step: usize,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TranslationModel,
    pub log: TrainLog,
}

fn encode_pair(model: &TranslationModel, src: &[String], tgt: &[String]) -> (Vec<usize>, Vec<usize>) {
    let cfg = &model.config;
    let s = model.src_vocab.encode(&src[..src.len().min(cfg.max_source_len)]);
    let t = model.tgt_vocab.encode(&tgt[..tgt.len().min(cfg.max_target_len)]);
    (s, t)
}

/// Summed cross-entropy of `pairs` under `model`.
pub fn batch_loss(model: &TranslationModel, pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let encoded: Vec<_> = pairs.iter().map(|(s, t)| encode_pair(model, s, t)).collect();
    loss_and_grads(&model.params, &Batch::new(&encoded), false).0
}

/// Summed cross-entropy and its exact gradient.
pub fn batch_loss_and_grads(model: &TranslationModel, pairs: &[(Vec<String>, Vec<String>)]) -> (f64, Params) {
    let encoded: Vec<_> = pairs.iter().map(|(s, t)| encode_pair(model, s, t)).collect();
    let (loss, grads) = loss_and_grads(&model.params, &Batch::new(&encoded), true);
    (loss, grads.expect("gradients requested"))
}

fn learning_rate(cfg: &Seq2SeqConfig, step: usize) -> f64 {
    if step < cfg.start_decay_step {
        cfg.learning_rate
    } else {
        let k = (step - cfg.start_decay_step) / cfg.decay_every + 1;
        cfg.learning_rate * cfg.lr_decay.powi(k as i32)
    }
}

fn mean_loss(params: &Params, data: &[(Vec<usize>, Vec<usize>)], batch_size: usize) -> f64 {
    let mut loss = 0.0;
    let mut tokens = 0usize;
    for chunk in data.chunks(batch_size) {
        let batch = Batch::new(chunk);
        loss += loss_and_grads(params, &batch, false).0;
        tokens += batch.target_tokens();
    }
    loss / tokens.max(1) as f64
}

pub fn train_translator(corpus: &ParallelCorpus, config: &Seq2SeqConfig) -> Result<TrainOutcome, TranslatorError> {
    train_translator_with(corpus, config, &TrainOptions::default())
}

/// Teacher-forced SGD with gradient-norm clipping and step decay. Returns the
/// parameters with the lowest validation loss (the final ones when the corpus
/// has no validation split).
pub fn train_translator_with(
    corpus: &ParallelCorpus,
    config: &Seq2SeqConfig,
    options: &TrainOptions,
) -> Result<TrainOutcome, TranslatorError> {
    config.validate()?;
    let train: Vec<_> = corpus.split(Split::Train).collect();
    if train.is_empty() {
        return Err(TranslatorError::EmptyCorpus);
    }
    let src_vocab = Vocab::build(train.iter().map(|p| p.source.as_slice()), config.src_vocab_size);
    let tgt_vocab = Vocab::build(train.iter().map(|p| p.target.as_slice()), config.tgt_vocab_size);
    let mut model = TranslationModel::initialize(config.clone(), src_vocab, tgt_vocab)?;
    let expected = Params::expected_count(config, model.src_vocab.len(), model.tgt_vocab.len());
    if model.parameter_count() != expected {
        return Err(TranslatorError::ShapeMismatch(format!(
            "{} parameters, closed form gives {expected}",
            model.parameter_count()
        )));
    }

    let train_data: Vec<_> = train
        .iter()
        .map(|p| encode_pair(&model, &p.source, &p.target))
        .collect();
    let valid_data: Vec<_> = corpus
        .split(Split::Valid)
        .map(|p| encode_pair(&model, &p.source, &p.target))
        .collect();

    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut log = TrainLog::default();
    let mut best: Option<(f64, Params)> = None;
    let mut selected = Vec::with_capacity(config.batch_size);

    for step in 1..=config.train_steps {
        selected.clear();
        while selected.len() < config.batch_size.min(train_data.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            selected.push(train_data[order[cursor]].clone());
            cursor += 1;
        }
        let batch = Batch::new(&selected);
        let (loss, grads) = loss_and_grads(&model.params, &batch, true);
        if !loss.is_finite() {
            return Err(TranslatorError::DivergedLoss { step });
        }
        let mut grads = grads.expect("gradients requested");
        grads.scale(1.0 / batch.size() as f64);
        let norm = grads.norm();
        if !norm.is_finite() {
            return Err(TranslatorError::DivergedLoss { step });
        }
        if norm > config.max_grad_norm {
            grads.scale(config.max_grad_norm / norm);
        }
        model.params.add_scaled(-learning_rate(config, step), &grads);
        if !model.params.all_finite() {
            return Err(TranslatorError::DivergedLoss { step });
        }
        let per_token = loss / batch.target_tokens().max(1) as f64;
        log.train_loss.push((step, per_token));
        if options.log_every > 0 && step % options.log_every == 0 {
            log::info!("step {step}/{}: loss {per_token:.4}", config.train_steps);
        }

        let validate_now = step % config.validate_every == 0 || step == config.train_steps;
        if validate_now && !valid_data.is_empty() {
            let v = mean_loss(&model.params, &valid_data, config.batch_size);
            log.valid_loss.push((step, v));
            log::info!("step {step}: validation loss {v:.4}");
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, model.params.clone()));
                log.best_step = step;
            }
        }
        if step % config.checkpoint_every == 0 {
            if let Some(dir) = &options.checkpoint_dir {
                let path = dir.join(format!("model_step_{step}.ckpt"));
                save_checkpoint(&model, &path)?;
                log.checkpoints.push(path);
            }
        }
    }

    match best {
        Some((_, params)) => model.params = params,
        None => log.best_step = config.train_steps,
    }
    Ok(TrainOutcome { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translator::ParallelPair;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tiny_config() -> Seq2SeqConfig {
        Seq2SeqConfig {
            hidden_units: 8,
            embedding_dim: 6,
            train_steps: 100,
            validate_every: 50,
            checkpoint_every: 50,
            batch_size: 4,
            ..Seq2SeqConfig::desk()
        }
    }

    fn pair(id: &str, s: &str, t: &str, split: Split) -> ParallelPair {
        ParallelPair {
            id: id.into(),
            source: words(s),
            target: words(t),
            split,
        }
    }

    #[test]
    fn single_pair_is_memorized() {
        let corpus = ParallelCorpus::new(vec![pair("0", "get the name", "method#L block#R", Split::Train)]).unwrap();
        let out = train_translator(&corpus, &tiny_config()).unwrap();
        let first = out.log.train_loss.first().unwrap().1;
        let last = out.log.train_loss.last().unwrap().1;
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn no_train_split_is_rejected() {
        let corpus = ParallelCorpus::new(vec![pair("0", "a", "b", Split::Test)]).unwrap();
        assert!(matches!(
            train_translator(&corpus, &tiny_config()),
            Err(TranslatorError::EmptyCorpus)
        ));
    }

    #[test]
    fn steps_below_validation_interval_rejected() {
        let cfg = Seq2SeqConfig {
            train_steps: 10,
            validate_every: 20,
            ..tiny_config()
        };
        assert!(matches!(cfg.validate(), Err(TranslatorError::InvalidConfig(_))));
    }

    #[test]
    fn best_validation_checkpoint_and_schedule() {
        let corpus = ParallelCorpus::new(vec![
            pair("0", "a b", "x y", Split::Train),
            pair("1", "b c", "y z", Split::Train),
            pair("2", "a c", "x z", Split::Valid),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            log_every: 0,
        };
        let out = train_translator_with(&corpus, &tiny_config(), &opts).unwrap();
        assert_eq!(out.log.valid_loss.len(), 2);
        assert_eq!(out.log.checkpoints.len(), 2);
        assert!(out.log.checkpoints.iter().all(|p| p.exists()));
        let best = out.log.valid_loss.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(out.log.best_step, best);
    }

    #[test]
    fn step_decay() {
        let cfg = Seq2SeqConfig {
            learning_rate: 1.0,
            start_decay_step: 10,
            decay_every: 5,
            lr_decay: 0.5,
            ..tiny_config()
        };
        assert_eq!(learning_rate(&cfg, 9), 1.0);
        assert_eq!(learning_rate(&cfg, 10), 0.5);
        assert_eq!(learning_rate(&cfg, 14), 0.5);
        assert_eq!(learning_rate(&cfg, 15), 0.25);
    }
}
