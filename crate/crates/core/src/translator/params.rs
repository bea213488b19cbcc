use ndarray::Array2;
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::Seq2SeqConfig;

/// One recurrent layer: gates `[input, forget, output, candidate]` stacked
/// row-wise in `w` (`4H x (in + H)`), bias `1 x 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
}

impl LstmLayer {
    fn new(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w: Array2::zeros((4 * hidden, input + hidden)),
            b: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols() - self.w.nrows() / 4
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub src_emb: Array2<f64>,
    pub tgt_emb: Array2<f64>,
    pub encoder: Vec<LstmLayer>,
    pub decoder: Vec<LstmLayer>,
    /// Bilinear attention score `h_t^T W h_s` (`H x H`).
    pub attn_score: Array2<f64>,
    /// Maps `[context; h_t]` to the attentional state (`H x 2H`, no bias).
    pub attn_out: Array2<f64>,
    pub proj_w: Array2<f64>,
    pub proj_b: Array2<f64>,
}

impl Params {
    pub fn zeros(cfg: &Seq2SeqConfig, src_vocab: usize, tgt_vocab: usize) -> Self {
        let (e, h) = (cfg.embedding_dim, cfg.hidden_units);
        let layers = |n: usize| (0..n).map(|l| LstmLayer::new(if l == 0 { e } else { h }, h)).collect();
        Params {
            src_emb: Array2::zeros((src_vocab, e)),
            tgt_emb: Array2::zeros((tgt_vocab, e)),
            encoder: layers(cfg.encoder_layers),
            decoder: layers(cfg.decoder_layers),
            attn_score: Array2::zeros((h, h)),
            attn_out: Array2::zeros((h, 2 * h)),
            proj_w: Array2::zeros((tgt_vocab, h)),
            proj_b: Array2::zeros((1, tgt_vocab)),
        }
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn init_uniform<R: Rng>(
        cfg: &Seq2SeqConfig,
        src_vocab: usize,
        tgt_vocab: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(cfg, src_vocab, tgt_vocab);
        let dist = Uniform::new_inclusive(-scale, scale);
        for t in p.tensors_mut() {
            t.mapv_inplace(|_| dist.sample(rng));
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        p
    }

    /// Tensors in a fixed order (also the checkpoint order).
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut v = vec![&self.src_emb, &self.tgt_emb];
        for l in self.encoder.iter().chain(&self.decoder) {
            v.push(&l.w);
            v.push(&l.b);
        }
        v.extend([&self.attn_score, &self.attn_out, &self.proj_w, &self.proj_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v = vec![&mut self.src_emb, &mut self.tgt_emb];
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.push(&mut l.w);
            v.push(&mut l.b);
        }
        v.extend([
            &mut self.attn_score,
            &mut self.attn_out,
            &mut self.proj_w,
            &mut self.proj_b,
        ]);
        v
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Closed-form parameter count for a configuration and vocabulary sizes.
    pub fn expected_count(cfg: &Seq2SeqConfig, src_vocab: usize, tgt_vocab: usize) -> usize {
        let (e, h) = (cfg.embedding_dim, cfg.hidden_units);
        let stack = |layers: usize| -> usize {
            (0..layers)
                .map(|l| {
                    let input = if l == 0 { e } else { h };
                    4 * h * (input + h + 1)
                })
                .sum()
        };
        src_vocab * e
            + tgt_vocab * e
            + stack(cfg.encoder_layers)
            + stack(cfg.decoder_layers)
            + h * h
            + 2 * h * h
            + tgt_vocab * h
            + tgt_vocab
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, b);
        }
    }

    /// Flat read access by global index, for gradient checks.
    pub fn get_flat(&self, mut index: usize) -> Option<f64> {
        for t in self.tensors() {
            if index < t.len() {
                return t.iter().nth(index).copied();
            }
            index -= t.len();
        }
        None
    }

    pub fn set_flat(&mut self, mut index: usize, value: f64) -> bool {
        for t in self.tensors_mut() {
            if index < t.len() {
                let cols = t.ncols();
                t[[index / cols, index % cols]] = value;
                return true;
            }
            index -= t.len();
        }
        false
    }
}
