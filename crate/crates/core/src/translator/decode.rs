use ndarray::{Array2, Axis};

use super::network::{decode_step, encode, DecoderState, Encoded};
use super::vocab::{BOS, EOS, PAD, UNK};
use super::{DecodeMode, TranslationModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub tokens: Vec<String>,
    /// Hit `max_target_len` before producing end-of-sequence.
    pub truncated: bool,
}

fn encode_query<S: AsRef<str>>(model: &TranslationModel, query: &[S]) -> Encoded {
    let ids: Vec<usize> = model
        .src_vocab
        .encode(&query[..query.len().min(model.config.max_source_len)]);
    let src: Vec<Vec<usize>> = ids.iter().map(|&id| vec![id]).collect();
    let mask = Array2::ones((1, ids.len()));
    encode(&model.params, &src, &mask)
}

fn is_emittable(id: usize) -> bool {
    id != PAD && id != BOS && id != UNK
}

/// Best emittable token (lowest id on ties) and its probability.
fn argmax(probs: ndarray::ArrayView1<f64>) -> usize {
    let mut best = EOS;
    let mut best_p = f64::NEG_INFINITY;
    for (id, &p) in probs.iter().enumerate() {
        if is_emittable(id) && p > best_p {
            best = id;
            best_p = p;
        }
    }
    best
}

/// Greedy decode, returning target ids and per-step attention rows.
fn greedy(model: &TranslationModel, enc: &Encoded) -> (Vec<usize>, Vec<Vec<f64>>, bool) {
    let mut state = DecoderState::from_encoder(&model.params, enc);
    let mut prev = BOS;
    let mut out = Vec::new();
    let mut attn = Vec::new();
    for _ in 0..model.config.max_target_len {
        let cache = decode_step(&model.params, enc, &mut state, &[prev]);
        attn.push(cache.attention().row(0).to_vec());
        let next = argmax(cache.probs().row(0));
        if next == EOS {
            return (out, attn, false);
        }
        out.push(next);
        prev = next;
    }
    (out, attn, true)
}

struct Hypothesis {
    ids: Vec<usize>,
    log_prob: f64,
    state: DecoderState,
}

fn beam(model: &TranslationModel, enc: &Encoded, width: usize) -> (Vec<usize>, bool) {
    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        state: DecoderState::from_encoder(&model.params, enc),
    }];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
    for _ in 0..model.config.max_target_len {
        let mut candidates: Vec<(f64, usize, usize, DecoderState)> = Vec::new();
        for (h_idx, hyp) in live.iter().enumerate() {
            let mut state = hyp.state.clone();
            let prev = hyp.ids.last().copied().unwrap_or(BOS);
            let cache = decode_step(&model.params, enc, &mut state, &[prev]);
            let probs = cache.probs().index_axis(Axis(0), 0).to_owned();
            let mut ranked: Vec<(usize, f64)> = probs
                .iter()
                .enumerate()
                .filter(|(id, _)| is_emittable(*id))
                .map(|(id, p)| (id, p.max(1e-300).ln()))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (id, lp) in ranked.into_iter().take(width) {
                candidates.push((hyp.log_prob + lp, h_idx, id, state.clone()));
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next_live = Vec::new();
        for (score, h_idx, id, state) in candidates.into_iter().take(width) {
            let mut ids = live[h_idx].ids.clone();
            if id == EOS {
                finished.push((ids, score));
            } else {
                ids.push(id);
                next_live.push(Hypothesis {
                    ids,
                    log_prob: score,
                    state,
                });
            }
        }
        live = next_live;
        let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
        let best_done = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        // Scores only decrease as hypotheses grow, so a finished one that beats
        // every live one cannot be overtaken.
        if live.is_empty() || finished.len() >= width || best_done >= best_live {
            break;
        }
    }
    match finished.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
        Some((ids, _)) => (ids, false),
        None => {
            let best = live
                .into_iter()
                .max_by(|a, b| a.log_prob.total_cmp(&b.log_prob))
                .map(|h| h.ids)
                .unwrap_or_default();
            (best, true)
        }
    }
}

/// Decodes `query` with the model's configured mode. Unknown source tokens map
/// to the unknown id; output never contains reserved tokens.
pub fn translate<S: AsRef<str>>(model: &TranslationModel, query: &[S]) -> Translation {
    if query.is_empty() {
        return Translation {
            tokens: Vec::new(),
            truncated: false,
        };
    }
    let enc = encode_query(model, query);
    let (ids, truncated) = match model.config.decode {
        DecodeMode::Greedy => {
            let (ids, _, t) = greedy(model, &enc);
            (ids, t)
        }
        DecodeMode::Beam(width) => beam(model, &enc, width.max(1)),
    };
    Translation {
        tokens: ids.iter().map(|&id| model.tgt_vocab.token(id).to_string()).collect(),
        truncated,
    }
}

/// Attention distribution over source positions at each greedy decode step
/// (`steps x source_len`).
pub fn attention_weights<S: AsRef<str>>(model: &TranslationModel, query: &[S]) -> Array2<f64> {
    if query.is_empty() {
        return Array2::zeros((0, 0));
    }
    let enc = encode_query(model, query);
    let (_, rows, _) = greedy(model, &enc);
    let cols = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_vec((rows.len(), cols), rows.concat()).expect("rectangular attention")
}
