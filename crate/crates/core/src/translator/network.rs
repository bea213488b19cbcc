//! Batched forward and backward passes of the attentional encoder-decoder.
//!
//! Shapes: batch `B`, hidden `H`, embedding `E`, source length `S`.
//! Sequences are right-padded; padded source steps carry the previous state
//! forward, so the final encoder state of each row is the state at its own
//! last token.

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView2, Axis};

use super::params::{LstmLayer, Params};
use super::vocab::{BOS, EOS, PAD};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) struct LstmCache {
    z: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    o: Array2<f64>,
    g: Array2<f64>,
    c_prev: Array2<f64>,
    tanh_c: Array2<f64>,
    /// `B x 1` column of 1.0 (real step) / 0.0 (padding); `None` means all real.
    mask: Option<Array2<f64>>,
}

/// One cell step. Returns the (masked) new state and the cache for backward.
pub(crate) fn lstm_forward(
    layer: &LstmLayer,
    x: &Array2<f64>,
    h_prev: &Array2<f64>,
    c_prev: &Array2<f64>,
    mask: Option<&Array2<f64>>,
) -> (Array2<f64>, Array2<f64>, LstmCache) {
    let hidden = h_prev.ncols();
    let z = concatenate(Axis(1), &[x.view(), h_prev.view()]).expect("batch sizes agree");
    let gates = z.dot(&layer.w.t()) + &layer.b;
    let i = gates.slice(s![.., 0..hidden]).mapv(sigmoid);
    let f = gates.slice(s![.., hidden..2 * hidden]).mapv(sigmoid);
    let o = gates.slice(s![.., 2 * hidden..3 * hidden]).mapv(sigmoid);
    let g = gates.slice(s![.., 3 * hidden..]).mapv(f64::tanh);
    let c_new = &f * c_prev + &i * &g;
    let tanh_c = c_new.mapv(f64::tanh);
    let h_new = &o * &tanh_c;
    let (h, c) = match mask {
        Some(m) => {
            let keep = m.mapv(|v| 1.0 - v);
            (&h_new * m + h_prev * &keep, &c_new * m + c_prev * &keep)
        }
        None => (h_new, c_new),
    };
    let cache = LstmCache {
        z,
        i,
        f,
        o,
        g,
        c_prev: c_prev.clone(),
        tanh_c,
        mask: mask.cloned(),
    };
    (h, c, cache)
}

/// Backward through one step. `dh`/`dc` are gradients w.r.t. the step's
/// (masked) outputs. Returns `(dx, dh_prev, dc_prev)` and accumulates weights.
pub(crate) fn lstm_backward(
    layer: &LstmLayer,
    grad: &mut LstmLayer,
    cache: &LstmCache,
    dh: &Array2<f64>,
    dc: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let hidden = dh.ncols();
    let (dh_new, dc_new, mut dh_prev, mut dc_prev) = match &cache.mask {
        Some(m) => {
            let keep = m.mapv(|v| 1.0 - v);
            (dh * m, dc * m, dh * &keep, dc * &keep)
        }
        None => (
            dh.clone(),
            dc.clone(),
            Array2::zeros(dh.raw_dim()),
            Array2::zeros(dc.raw_dim()),
        ),
    };
    let d_o = &dh_new * &cache.tanh_c;
    let dc_total = dc_new + &dh_new * &cache.o * &cache.tanh_c.mapv(|t| 1.0 - t * t);
    let d_i = &dc_total * &cache.g;
    let d_g = &dc_total * &cache.i;
    let d_f = &dc_total * &cache.c_prev;
    dc_prev += &(&dc_total * &cache.f);

    let batch = dh.nrows();
    let mut dgates = Array2::<f64>::zeros((batch, 4 * hidden));
    dgates
        .slice_mut(s![.., 0..hidden])
        .assign(&(&d_i * &cache.i.mapv(|v| v * (1.0 - v))));
    dgates
        .slice_mut(s![.., hidden..2 * hidden])
        .assign(&(&d_f * &cache.f.mapv(|v| v * (1.0 - v))));
    dgates
        .slice_mut(s![.., 2 * hidden..3 * hidden])
        .assign(&(&d_o * &cache.o.mapv(|v| v * (1.0 - v))));
    dgates
        .slice_mut(s![.., 3 * hidden..])
        .assign(&(&d_g * &cache.g.mapv(|v| 1.0 - v * v)));

    grad.w += &dgates.t().dot(&cache.z);
    grad.b += &dgates.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dz = dgates.dot(&layer.w);
    let input = layer.input_size();
    let dx = dz.slice(s![.., 0..input]).to_owned();
    dh_prev += &dz.slice(s![.., input..]);
    (dx, dh_prev, dc_prev)
}

fn gather_rows(table: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).assign(&table.row(id));
    }
    out
}

fn scatter_rows(grad: &mut Array2<f64>, ids: &[usize], d: &Array2<f64>) {
    for (r, &id) in ids.iter().enumerate() {
        let mut row = grad.row_mut(id);
        row += &d.row(r);
    }
}

/// Padded, id-encoded batch.
pub(crate) struct Batch {
    /// `src[s][b]`
    pub src: Vec<Vec<usize>>,
    /// `B x S` 1.0/0.0
    pub src_mask: Array2<f64>,
    /// Decoder inputs (`BOS y...`) and outputs (`y... EOS`), `[t][b]`.
    pub tgt_in: Vec<Vec<usize>>,
    pub tgt_out: Vec<Vec<usize>>,
    pub tgt_mask: Array2<f64>,
}

impl Batch {
    pub fn new(pairs: &[(Vec<usize>, Vec<usize>)]) -> Self {
        let b = pairs.len();
        let s_len = pairs.iter().map(|p| p.0.len()).max().unwrap_or(0).max(1);
        let t_len = pairs.iter().map(|p| p.1.len() + 1).max().unwrap_or(1);
        let mut src = vec![vec![PAD; b]; s_len];
        let mut src_mask = Array2::zeros((b, s_len));
        let mut tgt_in = vec![vec![PAD; b]; t_len];
        let mut tgt_out = vec![vec![PAD; b]; t_len];
        let mut tgt_mask = Array2::zeros((b, t_len));
        for (j, (s_ids, t_ids)) in pairs.iter().enumerate() {
            for (i, &id) in s_ids.iter().enumerate() {
                src[i][j] = id;
                src_mask[[j, i]] = 1.0;
            }
            tgt_in[0][j] = BOS;
            for (i, &id) in t_ids.iter().enumerate() {
                tgt_in[i + 1][j] = id;
                tgt_out[i][j] = id;
            }
            tgt_out[t_ids.len()][j] = EOS;
            for i in 0..=t_ids.len() {
                tgt_mask[[j, i]] = 1.0;
            }
        }
        Batch {
            src,
            src_mask,
            tgt_in,
            tgt_out,
            tgt_mask,
        }
    }

    pub fn size(&self) -> usize {
        self.src_mask.nrows()
    }

    pub fn target_tokens(&self) -> usize {
        self.tgt_mask.sum() as usize
    }
}

/// Encoder outputs plus per-layer final states.
pub(crate) struct Encoded {
    /// `B x S x H` top-layer outputs.
    pub memory: Array3<f64>,
    /// `B x S` mask.
    pub mask: Array2<f64>,
    pub h: Vec<Array2<f64>>,
    pub c: Vec<Array2<f64>>,
    caches: Vec<Vec<LstmCache>>,
}

pub(crate) fn encode(params: &Params, src: &[Vec<usize>], mask: &Array2<f64>) -> Encoded {
    let batch = mask.nrows();
    let s_len = src.len();
    let hidden = params.attn_score.nrows();
    let layers = params.encoder.len();
    let mut h = vec![Array2::zeros((batch, hidden)); layers];
    let mut c = vec![Array2::zeros((batch, hidden)); layers];
    let mut memory = Array3::zeros((batch, s_len, hidden));
    let mut caches = Vec::with_capacity(s_len);
    for (step, ids) in src.iter().enumerate() {
        let m = mask.column(step).to_owned().insert_axis(Axis(1));
        let all_real = m.iter().all(|v| *v == 1.0);
        let mut x = gather_rows(&params.src_emb, ids);
        let mut step_cache = Vec::with_capacity(layers);
        for l in 0..layers {
            let (hn, cn, cache) = lstm_forward(
                &params.encoder[l],
                &x,
                &h[l],
                &c[l],
                if all_real { None } else { Some(&m) },
            );
            h[l] = hn;
            c[l] = cn;
            x = h[l].clone();
            step_cache.push(cache);
        }
        memory.slice_mut(s![.., step, ..]).assign(&x);
        caches.push(step_cache);
    }
    Encoded {
        memory,
        mask: mask.clone(),
        h,
        c,
        caches,
    }
}

/// Decoder state carried between steps.
#[derive(Clone)]
pub(crate) struct DecoderState {
    pub h: Vec<Array2<f64>>,
    pub c: Vec<Array2<f64>>,
}

impl DecoderState {
    /// Decoder layer `l` starts from encoder layer `l` (zeros beyond the encoder depth).
    pub fn from_encoder(params: &Params, enc: &Encoded) -> Self {
        let batch = enc.mask.nrows();
        let hidden = params.attn_score.nrows();
        let (h, c) = (0..params.decoder.len())
            .map(|l| match (enc.h.get(l), enc.c.get(l)) {
                (Some(h), Some(c)) => (h.clone(), c.clone()),
                _ => (Array2::zeros((batch, hidden)), Array2::zeros((batch, hidden))),
            })
            .unzip();
        DecoderState { h, c }
    }
}

pub(crate) struct StepCache {
    lstm: Vec<LstmCache>,
    top: Array2<f64>,
    query: Array2<f64>,
    attn: Array2<f64>,
    concat: Array2<f64>,
    attentional: Array2<f64>,
    probs: Array2<f64>,
}

/// Attention weights `B x S` for query rows `q` (`B x H`).
fn attend(memory: &Array3<f64>, mask: &Array2<f64>, q: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (batch, s_len, hidden) = memory.dim();
    let mut attn = Array2::zeros((batch, s_len));
    let mut ctx = Array2::zeros((batch, hidden));
    for b in 0..batch {
        let mem = memory.slice(s![b, .., ..]);
        let scores = mem.dot(&q.row(b));
        let max = scores
            .iter()
            .zip(mask.row(b))
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut row = attn.row_mut(b);
        let mut total = 0.0;
        for s in 0..s_len {
            if mask[[b, s]] > 0.0 {
                let e = (scores[s] - max).exp();
                row[s] = e;
                total += e;
            }
        }
        row.mapv_inplace(|v| v / total);
        ctx.row_mut(b).assign(&row.dot(&mem));
    }
    (attn, ctx)
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// One decoder step for inputs `ids`; returns output probabilities `B x V`
/// and the step cache.
pub(crate) fn decode_step(params: &Params, enc: &Encoded, state: &mut DecoderState, ids: &[usize]) -> StepCache {
    let mut x = gather_rows(&params.tgt_emb, ids);
    let mut lstm = Vec::with_capacity(params.decoder.len());
    for l in 0..params.decoder.len() {
        let (h, c, cache) = lstm_forward(&params.decoder[l], &x, &state.h[l], &state.c[l], None);
        state.h[l] = h;
        state.c[l] = c;
        x = state.h[l].clone();
        lstm.push(cache);
    }
    let top = x;
    let query = top.dot(&params.attn_score);
    let (attn, ctx) = attend(&enc.memory, &enc.mask, &query);
    let concat = concatenate(Axis(1), &[ctx.view(), top.view()]).expect("batch sizes agree");
    let attentional = concat.dot(&params.attn_out.t()).mapv(f64::tanh);
    let mut probs = attentional.dot(&params.proj_w.t()) + &params.proj_b;
    softmax_rows(&mut probs);
    StepCache {
        lstm,
        top,
        query,
        attn,
        concat,
        attentional,
        probs,
    }
}

impl StepCache {
    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    pub fn attention(&self) -> ArrayView2<'_, f64> {
        self.attn.view()
    }
}

/// Summed token cross-entropy of a batch and, optionally, its gradients.
pub(crate) fn loss_and_grads(params: &Params, batch: &Batch, want_grads: bool) -> (f64, Option<Params>) {
    let enc = encode(params, &batch.src, &batch.src_mask);
    let mut state = DecoderState::from_encoder(params, &enc);
    let mut steps = Vec::with_capacity(batch.tgt_in.len());
    let mut loss = 0.0;
    for (t, ids) in batch.tgt_in.iter().enumerate() {
        let cache = decode_step(params, &enc, &mut state, ids);
        for (b, &y) in batch.tgt_out[t].iter().enumerate() {
            let m = batch.tgt_mask[[b, t]];
            if m > 0.0 {
                loss -= m * cache.probs[[b, y]].max(1e-300).ln();
            }
        }
        if want_grads {
            steps.push(cache);
        }
    }
    if !want_grads {
        return (loss, None);
    }

    let mut grad = params.zeros_like();
    let (bsz, s_len, hidden) = enc.memory.dim();
    let mut d_memory = Array3::<f64>::zeros((bsz, s_len, hidden));
    let dec_layers = params.decoder.len();
    let mut dh = vec![Array2::<f64>::zeros((bsz, hidden)); dec_layers];
    let mut dc = vec![Array2::<f64>::zeros((bsz, hidden)); dec_layers];

    for (t, cache) in steps.iter().enumerate().rev() {
        let mut d_logits = cache.probs.clone();
        for (b, &y) in batch.tgt_out[t].iter().enumerate() {
            d_logits[[b, y]] -= 1.0;
        }
        let m = batch.tgt_mask.column(t).to_owned().insert_axis(Axis(1));
        d_logits *= &m;

        grad.proj_w += &d_logits.t().dot(&cache.attentional);
        grad.proj_b += &d_logits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_att = d_logits.dot(&params.proj_w);
        let d_pre = d_att * &cache.attentional.mapv(|v| 1.0 - v * v);
        grad.attn_out += &d_pre.t().dot(&cache.concat);
        let d_concat = d_pre.dot(&params.attn_out);
        let d_ctx = d_concat.slice(s![.., 0..hidden]);
        let mut d_top = d_concat.slice(s![.., hidden..]).to_owned();

        let mut d_query = Array2::<f64>::zeros((bsz, hidden));
        for b in 0..bsz {
            let mem = enc.memory.slice(s![b, .., ..]);
            let a = cache.attn.row(b);
            let dctx_b = d_ctx.row(b);
            let da: Array1<f64> = mem.dot(&dctx_b);
            let weighted = a.dot(&da);
            let d_score: Array1<f64> = &a * &(da - weighted);
            d_query.row_mut(b).assign(&d_score.dot(&mem));
            let mut dmem = d_memory.slice_mut(s![b, .., ..]);
            for s_i in 0..s_len {
                let mut row = dmem.row_mut(s_i);
                row.scaled_add(a[s_i], &dctx_b);
                row.scaled_add(d_score[s_i], &cache.query.row(b));
            }
        }
        grad.attn_score += &cache.top.t().dot(&d_query);
        d_top += &d_query.dot(&params.attn_score.t());

        let mut d_above = d_top;
        for l in (0..dec_layers).rev() {
            let total = &dh[l] + &d_above;
            let (dx, dhp, dcp) =
                lstm_backward(&params.decoder[l], &mut grad.decoder[l], &cache.lstm[l], &total, &dc[l]);
            dh[l] = dhp;
            dc[l] = dcp;
            d_above = dx;
        }
        scatter_rows(&mut grad.tgt_emb, &batch.tgt_in[t], &d_above);
    }

    let enc_layers = params.encoder.len();
    let mut edh: Vec<Array2<f64>> = (0..enc_layers)
        .map(|l| dh.get(l).cloned().unwrap_or_else(|| Array2::zeros((bsz, hidden))))
        .collect();
    let mut edc: Vec<Array2<f64>> = (0..enc_layers)
        .map(|l| dc.get(l).cloned().unwrap_or_else(|| Array2::zeros((bsz, hidden))))
        .collect();
    for s_i in (0..s_len).rev() {
        let mut d_above = d_memory.slice(s![.., s_i, ..]).to_owned();
        for l in (0..enc_layers).rev() {
            let total = &edh[l] + &d_above;
            let (dx, dhp, dcp) = lstm_backward(
                &params.encoder[l],
                &mut grad.encoder[l],
                &enc.caches[s_i][l],
                &total,
                &edc[l],
            );
            edh[l] = dhp;
            edc[l] = dcp;
            d_above = dx;
        }
        scatter_rows(&mut grad.src_emb, &batch.src[s_i], &d_above);
    }
    (loss, Some(grad))
}
