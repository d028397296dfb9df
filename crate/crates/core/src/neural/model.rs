//! The compact encoder-decoder: teacher-forced loss and exact analytic
//! gradients, written directly against ndarray with explicit caches.
//!
//! Sequences are processed unpadded one at a time; batch loss is the token
//! mean over every sequence and batch gradients fold per-sequence gradients
//! in batch order, so parallel and serial execution agree bitwise.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::params::{
    AttentionParams, DecoderLayerParams, EncoderLayerParams, LayerNormParams, ModelConfig, Params,
};
use super::vocab::Vocab;
use super::NeuralError;
use crate::dualdata::{Direction, TrainingPair};
use crate::par;

const LN_EPS: f64 = 1e-5;

/// A batch of padded id matrices with masks and direction tags.
#[derive(Debug, Clone)]
pub struct Batch {
    pub input_ids: Array2<usize>,
    pub input_mask: Array2<f64>,
    pub target_ids: Array2<usize>,
    pub target_mask: Array2<f64>,
    pub directions: Vec<Direction>,
}

impl Batch {
    /// Encodes pairs into a padded batch, truncating to the given limits.
    pub fn from_pairs(
        pairs: &[&TrainingPair],
        vocab: &Vocab,
        max_src_len: usize,
        max_tgt_len: usize,
    ) -> Self {
        let encode = |tokens: &[String], cap: usize| -> Vec<usize> {
            let mut ids = vocab.encode(tokens);
            ids.truncate(cap);
            ids
        };
        let inputs: Vec<Vec<usize>> = pairs.iter().map(|p| encode(&p.input, max_src_len)).collect();
        let targets: Vec<Vec<usize>> =
            pairs.iter().map(|p| encode(&p.target, max_tgt_len)).collect();
        let rows = pairs.len();
        let src_width = inputs.iter().map(Vec::len).max().unwrap_or(0);
        let tgt_width = targets.iter().map(Vec::len).max().unwrap_or(0);
        let pad = vocab.pad_id();

        let mut input_ids = Array2::from_elem((rows, src_width), pad);
        let mut input_mask = Array2::zeros((rows, src_width));
        let mut target_ids = Array2::from_elem((rows, tgt_width), pad);
        let mut target_mask = Array2::zeros((rows, tgt_width));
        for (r, ids) in inputs.iter().enumerate() {
            for (c, &id) in ids.iter().enumerate() {
                input_ids[[r, c]] = id;
                input_mask[[r, c]] = 1.0;
            }
        }
        for (r, ids) in targets.iter().enumerate() {
            for (c, &id) in ids.iter().enumerate() {
                target_ids[[r, c]] = id;
                target_mask[[r, c]] = 1.0;
            }
        }
        Self {
            input_ids,
            input_mask,
            target_ids,
            target_mask,
            directions: pairs.iter().map(|p| p.direction).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Non-pad input prefix of row `r`.
    pub fn input_row(&self, r: usize) -> Vec<usize> {
        self.row(&self.input_ids, &self.input_mask, r)
    }

    /// Non-pad target prefix of row `r`.
    pub fn target_row(&self, r: usize) -> Vec<usize> {
        self.row(&self.target_ids, &self.target_mask, r)
    }

    fn row(&self, ids: &Array2<usize>, mask: &Array2<f64>, r: usize) -> Vec<usize> {
        (0..ids.ncols())
            .take_while(|&c| mask[[r, c]] == 1.0)
            .map(|c| ids[[r, c]])
            .collect()
    }
}

/// Shared-parameter sequence-to-sequence model.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
    pub(crate) positional: Array2<f64>,
}

/// Checkpoint wire format: tensors as u64 bit patterns for exact round trips.
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    len: usize,
    bits: Vec<u64>,
}

impl Seq2SeqModel {
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self, NeuralError> {
        config.validate()?;
        let params = Params::init(&config, vocab.len());
        let max_pos = config.max_src_len.max(config.max_tgt_len);
        let positional = sinusoidal_positions(max_pos, config.d_model);
        Ok(Self {
            config,
            vocab,
            params,
            positional,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    /// Mean negative log-likelihood over non-pad target tokens.
    pub fn nll(&self, batch: &Batch) -> Result<f64, NeuralError> {
        self.validate_batch(batch)?;
        let stats: Vec<(f64, usize)> = par::map_indexed(batch.len(), |r| {
            let src = batch.input_row(r);
            let tgt = batch.target_row(r);
            if tgt.is_empty() {
                return (0.0, 0);
            }
            let run = self.forward_seq(&src, &tgt);
            (run.loss_sum, run.token_count)
        });
        let total: f64 = stats.iter().map(|(l, _)| l).sum();
        let count: usize = stats.iter().map(|(_, c)| c).sum();
        if count == 0 {
            return Ok(0.0);
        }
        let loss = total / count as f64;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite {
                block: "loss".into(),
            });
        }
        Ok(loss)
    }

    /// Loss plus exact gradients of [`Seq2SeqModel::nll`] with respect to
    /// every parameter block.
    pub fn grads(&self, batch: &Batch) -> Result<(f64, Params), NeuralError> {
        self.validate_batch(batch)?;
        let results: Vec<Option<(f64, usize, Params)>> = par::map_indexed(batch.len(), |r| {
            let src = batch.input_row(r);
            let tgt = batch.target_row(r);
            if tgt.is_empty() {
                return None;
            }
            let run = self.forward_seq(&src, &tgt);
            let (loss_sum, count) = (run.loss_sum, run.token_count);
            let grad = self.backward_seq(&src, &tgt, run);
            Some((loss_sum, count, grad))
        });

        let mut grad = self.params.zeros_like();
        let mut total = 0.0;
        let mut count = 0usize;
        for item in results.into_iter().flatten() {
            total += item.0;
            count += item.1;
            grad.add_assign(&item.2);
        }
        if count == 0 {
            return Ok((0.0, grad));
        }
        grad.scale(1.0 / count as f64);
        let loss = total / count as f64;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite {
                block: "loss".into(),
            });
        }
        if let Some(block) = grad.first_non_finite() {
            return Err(NeuralError::NonFinite { block });
        }
        Ok((loss, grad))
    }

    /// Fraction of non-pad target tokens whose teacher-forced argmax matches
    /// the gold token.
    pub fn token_accuracy(&self, batch: &Batch) -> Result<f64, NeuralError> {
        self.validate_batch(batch)?;
        let stats: Vec<(usize, usize)> = par::map_indexed(batch.len(), |r| {
            let src = batch.input_row(r);
            let tgt = batch.target_row(r);
            if tgt.is_empty() {
                return (0, 0);
            }
            let run = self.forward_seq(&src, &tgt);
            let mut hits = 0;
            for (t, &gold) in tgt.iter().enumerate() {
                let row = run.logits.row(t);
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for (i, &v) in row.iter().enumerate() {
                    if v > best_value {
                        best_value = v;
                        best = i;
                    }
                }
                if best == gold {
                    hits += 1;
                }
            }
            (hits, tgt.len())
        });
        let hits: usize = stats.iter().map(|(h, _)| h).sum();
        let count: usize = stats.iter().map(|(_, c)| c).sum();
        Ok(if count == 0 {
            0.0
        } else {
            hits as f64 / count as f64
        })
    }

    /// Teacher-forced logits for one sequence (decode-consistency checks).
    #[cfg(test)]
    pub(crate) fn forward_logits(&self, src: &[usize], tgt: &[usize]) -> Array2<f64> {
        self.forward_seq(src, tgt).logits
    }

    fn validate_batch(&self, batch: &Batch) -> Result<(), NeuralError> {
        let v = self.vocab.len();
        if batch.input_ids.nrows() != batch.target_ids.nrows()
            || batch.input_ids.dim() != batch.input_mask.dim()
            || batch.target_ids.dim() != batch.target_mask.dim()
            || batch.directions.len() != batch.input_ids.nrows()
        {
            return Err(NeuralError::ShapeMismatch(format!(
                "batch shapes disagree: inputs {:?}, targets {:?}, {} direction tags",
                batch.input_ids.dim(),
                batch.target_ids.dim(),
                batch.directions.len()
            )));
        }
        for &id in batch.input_ids.iter().chain(batch.target_ids.iter()) {
            if id >= v {
                return Err(NeuralError::TokenOutOfRange { id, vocab: v });
            }
        }
        Ok(())
    }

    /// Embeds ids with `sqrt(d)` scaling plus sinusoidal positions.
    pub(crate) fn embed(&self, ids: &[usize]) -> Array2<f64> {
        let d = self.config.d_model;
        let scale = (d as f64).sqrt();
        let mut x = Array2::zeros((ids.len(), d));
        for (i, &id) in ids.iter().enumerate() {
            let row = self.params.embedding.row(id);
            for c in 0..d {
                x[[i, c]] = row[c] * scale + self.positional[[i, c]];
            }
        }
        x
    }

    pub(crate) fn decoder_input(&self, target: &[usize]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(target.len());
        ids.push(self.vocab.bos_id());
        ids.extend_from_slice(&target[..target.len() - 1]);
        ids
    }

    fn forward_seq(&self, src: &[usize], tgt: &[usize]) -> SeqRun {
        let heads = self.config.heads;

        // Encoder.
        let mut x = self.embed(src);
        let mut enc_caches = Vec::with_capacity(self.params.encoder.len());
        for layer in &self.params.encoder {
            let (next, cache) = encoder_layer_forward(&x, layer, heads);
            enc_caches.push((x, cache));
            x = next;
        }
        let memory = x;

        // Decoder with teacher forcing.
        let dec_ids = self.decoder_input(tgt);
        let mut y = self.embed(&dec_ids);
        let mut dec_caches = Vec::with_capacity(self.params.decoder.len());
        for layer in &self.params.decoder {
            let (next, cache) = decoder_layer_forward(&y, &memory, layer, heads);
            dec_caches.push((y, cache));
            y = next;
        }
        let logits = y.dot(&self.params.output);

        let mut loss_sum = 0.0;
        let mut dlogits = Array2::zeros(logits.dim());
        for (t, &gold) in tgt.iter().enumerate() {
            let row = logits.row(t);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &v in row.iter() {
                z += (v - max).exp();
            }
            let lse = max + z.ln();
            loss_sum += lse - row[gold];
            for (i, &v) in row.iter().enumerate() {
                dlogits[[t, i]] = (v - max).exp() / z;
            }
            dlogits[[t, gold]] -= 1.0;
        }

        SeqRun {
            loss_sum,
            token_count: tgt.len(),
            memory,
            enc_caches,
            dec_caches,
            dec_out: y,
            logits,
            dlogits,
        }
    }

    fn backward_seq(&self, src: &[usize], tgt: &[usize], run: SeqRun) -> Params {
        let heads = self.config.heads;
        let d = self.config.d_model;
        let mut grad = self.params.zeros_like();

        // Output projection.
        let mut d_dec = run.dlogits.dot(&self.params.output.t());
        grad.output = run.dec_out.t().dot(&run.dlogits);

        // Decoder stack, accumulating memory gradient from cross-attention.
        let mut d_memory: Array2<f64> = Array2::zeros(run.memory.dim());
        for (l, layer) in self.params.decoder.iter().enumerate().rev() {
            let (y_in, cache) = &run.dec_caches[l];
            let (d_y, d_mem) = decoder_layer_backward(
                &d_dec,
                y_in,
                &run.memory,
                cache,
                layer,
                &mut grad.decoder[l],
                heads,
            );
            d_dec = d_y;
            d_memory += &d_mem;
        }

        // Encoder stack.
        let mut d_x = d_memory;
        for (l, layer) in self.params.encoder.iter().enumerate().rev() {
            let (x_in, cache) = &run.enc_caches[l];
            d_x = encoder_layer_backward(&d_x, x_in, cache, layer, &mut grad.encoder[l], heads);
        }

        // Embedding rows (positional encodings are constants).
        let scale = (d as f64).sqrt();
        for (i, &id) in src.iter().enumerate() {
            let mut row = grad.embedding.row_mut(id);
            for c in 0..d {
                row[c] += d_x[[i, c]] * scale;
            }
        }
        let dec_ids = self.decoder_input(tgt);
        for (i, &id) in dec_ids.iter().enumerate() {
            let mut row = grad.embedding.row_mut(id);
            for c in 0..d {
                row[c] += d_dec[[i, c]] * scale;
            }
        }
        grad
    }
}

struct SeqRun {
    loss_sum: f64,
    token_count: usize,
    memory: Array2<f64>,
    enc_caches: Vec<(Array2<f64>, EncoderLayerCache)>,
    dec_caches: Vec<(Array2<f64>, DecoderLayerCache)>,
    dec_out: Array2<f64>,
    logits: Array2<f64>,
    dlogits: Array2<f64>,
}

pub(crate) fn sinusoidal_positions(max_len: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((max_len, d));
    for pos in 0..max_len {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            pe[[pos, i]] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

// ---------------------------------------------------------------------------
// Layer building blocks
// ---------------------------------------------------------------------------

pub(crate) struct AttnCache {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Softmax output per head, [t_q, t_k].
    attn: Vec<Array2<f64>>,
    /// Head-concatenated context before the output projection.
    concat: Array2<f64>,
}

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

pub(crate) struct EncoderLayerCache {
    attn: AttnCache,
    ln1: LnCache,
    n1: Array2<f64>,
    h: Array2<f64>,
    ln2: LnCache,
}

pub(crate) struct DecoderLayerCache {
    self_attn: AttnCache,
    ln1: LnCache,
    n1: Array2<f64>,
    cross_attn: AttnCache,
    ln2: LnCache,
    n2: Array2<f64>,
    h: Array2<f64>,
    ln3: LnCache,
}

pub(crate) fn attention_forward(
    x_q: &Array2<f64>,
    x_kv: &Array2<f64>,
    p: &AttentionParams,
    heads: usize,
    causal: bool,
) -> (Array2<f64>, AttnCache) {
    let d = x_q.ncols();
    let dh = d / heads;
    let q = x_q.dot(&p.wq);
    let k = x_kv.dot(&p.wk);
    let v = x_kv.dot(&p.wv);
    let t_q = q.nrows();
    let mut concat = Array2::zeros((t_q, d));
    let mut attn = Vec::with_capacity(heads);
    let scale = 1.0 / (dh as f64).sqrt();
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut scores = qh.dot(&kh.t());
        scores *= scale;
        if causal {
            for i in 0..scores.nrows() {
                for j in (i + 1)..scores.ncols() {
                    scores[[i, j]] = f64::NEG_INFINITY;
                }
            }
        }
        softmax_rows(&mut scores);
        let context = scores.dot(&vh);
        concat.slice_mut(cols).assign(&context);
        attn.push(scores);
    }
    let out = concat.dot(&p.wo);
    (out, AttnCache { q, k, v, attn, concat })
}

/// Returns `(d_x_q, d_x_kv)` and accumulates parameter gradients.
pub(crate) fn attention_backward(
    d_out: &Array2<f64>,
    x_q: &Array2<f64>,
    x_kv: &Array2<f64>,
    cache: &AttnCache,
    p: &AttentionParams,
    g: &mut AttentionParams,
    heads: usize,
) -> (Array2<f64>, Array2<f64>) {
    let d = x_q.ncols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    g.wo += &cache.concat.t().dot(d_out);
    let d_concat = d_out.dot(&p.wo.t());

    let mut d_q = Array2::zeros(cache.q.dim());
    let mut d_k = Array2::zeros(cache.k.dim());
    let mut d_v = Array2::zeros(cache.v.dim());
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let a = &cache.attn[h];
        let d_context = d_concat.slice(cols);
        let vh = cache.v.slice(cols);
        let qh = cache.q.slice(cols);
        let kh = cache.k.slice(cols);

        let mut d_a = d_context.dot(&vh.t());
        d_v.slice_mut(cols).assign(&a.t().dot(&d_context));

        // Softmax backward per row: ds = a ⊙ (da − ⟨da, a⟩).
        for i in 0..d_a.nrows() {
            let dot: f64 = d_a
                .row(i)
                .iter()
                .zip(a.row(i).iter())
                .map(|(x, y)| x * y)
                .sum();
            for j in 0..d_a.ncols() {
                d_a[[i, j]] = a[[i, j]] * (d_a[[i, j]] - dot);
            }
        }
        let mut d_qh = d_a.dot(&kh);
        d_qh *= scale;
        let mut d_kh = d_a.t().dot(&qh);
        d_kh *= scale;
        d_q.slice_mut(cols).assign(&d_qh);
        d_k.slice_mut(cols).assign(&d_kh);
    }

    g.wq += &x_q.t().dot(&d_q);
    g.wk += &x_kv.t().dot(&d_k);
    g.wv += &x_kv.t().dot(&d_v);

    let d_x_q = d_q.dot(&p.wq.t());
    let mut d_x_kv = d_k.dot(&p.wk.t());
    d_x_kv += &d_v.dot(&p.wv.t());
    (d_x_q, d_x_kv)
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
}

pub(crate) fn layer_norm_forward(
    x: &Array2<f64>,
    p: &LayerNormParams,
) -> (Array2<f64>, LnCache) {
    let (rows, d) = x.dim();
    let mut y = Array2::zeros((rows, d));
    let mut xhat = Array2::zeros((rows, d));
    let mut rstd = Array1::zeros(rows);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let normalized = (x[[r, c]] - mean) * rs;
            xhat[[r, c]] = normalized;
            y[[r, c]] = normalized * p.gamma[c] + p.beta[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    d_y: &Array2<f64>,
    cache: &LnCache,
    p: &LayerNormParams,
    g: &mut LayerNormParams,
) -> Array2<f64> {
    let (rows, d) = d_y.dim();
    let mut d_x = Array2::zeros((rows, d));
    for r in 0..rows {
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for c in 0..d {
            let dxhat = d_y[[r, c]] * p.gamma[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * cache.xhat[[r, c]];
            g.gamma[c] += d_y[[r, c]] * cache.xhat[[r, c]];
            g.beta[c] += d_y[[r, c]];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        let rs = cache.rstd[r];
        for c in 0..d {
            let dxhat = d_y[[r, c]] * p.gamma[c];
            d_x[[r, c]] = rs * (dxhat - mean_dxhat - cache.xhat[[r, c]] * mean_dxhat_xhat);
        }
    }
    d_x
}

fn encoder_layer_forward(
    x: &Array2<f64>,
    p: &EncoderLayerParams,
    heads: usize,
) -> (Array2<f64>, EncoderLayerCache) {
    let (attn_out, attn) = attention_forward(x, x, &p.attn, heads, false);
    let r1 = x + &attn_out;
    let (n1, ln1) = layer_norm_forward(&r1, &p.ln1);
    let mut h = n1.dot(&p.ffn.w1);
    h.mapv_inplace(|v| v.max(0.0));
    let f = h.dot(&p.ffn.w2);
    let r2 = &n1 + &f;
    let (n2, ln2) = layer_norm_forward(&r2, &p.ln2);
    (n2, EncoderLayerCache { attn, ln1, n1, h, ln2 })
}

fn encoder_layer_backward(
    d_out: &Array2<f64>,
    x_in: &Array2<f64>,
    cache: &EncoderLayerCache,
    p: &EncoderLayerParams,
    g: &mut EncoderLayerParams,
    heads: usize,
) -> Array2<f64> {
    let d_r2 = layer_norm_backward(d_out, &cache.ln2, &p.ln2, &mut g.ln2);
    // r2 = n1 + relu(n1 w1) w2
    g.ffn.w2 += &cache.h.t().dot(&d_r2);
    let mut d_h = d_r2.dot(&p.ffn.w2.t());
    for (dh, &h) in d_h.iter_mut().zip(cache.h.iter()) {
        if h <= 0.0 {
            *dh = 0.0;
        }
    }
    g.ffn.w1 += &cache.n1.t().dot(&d_h);
    let mut d_n1 = d_h.dot(&p.ffn.w1.t());
    d_n1 += &d_r2;

    let d_r1 = layer_norm_backward(&d_n1, &cache.ln1, &p.ln1, &mut g.ln1);
    let (d_xq, d_xkv) = attention_backward(&d_r1, x_in, x_in, &cache.attn, &p.attn, &mut g.attn, heads);
    let mut d_x = d_r1;
    d_x += &d_xq;
    d_x += &d_xkv;
    d_x
}

fn decoder_layer_forward(
    y: &Array2<f64>,
    memory: &Array2<f64>,
    p: &DecoderLayerParams,
    heads: usize,
) -> (Array2<f64>, DecoderLayerCache) {
    let (self_out, self_attn) = attention_forward(y, y, &p.self_attn, heads, true);
    let r1 = y + &self_out;
    let (n1, ln1) = layer_norm_forward(&r1, &p.ln1);
    let (cross_out, cross_attn) = attention_forward(&n1, memory, &p.cross_attn, heads, false);
    let r2 = &n1 + &cross_out;
    let (n2, ln2) = layer_norm_forward(&r2, &p.ln2);
    let mut h = n2.dot(&p.ffn.w1);
    h.mapv_inplace(|v| v.max(0.0));
    let f = h.dot(&p.ffn.w2);
    let r3 = &n2 + &f;
    let (n3, ln3) = layer_norm_forward(&r3, &p.ln3);
    (
        n3,
        DecoderLayerCache {
            self_attn,
            ln1,
            n1,
            cross_attn,
            ln2,
            n2,
            h,
            ln3,
        },
    )
}

/// Returns `(d_y, d_memory)` and accumulates parameter gradients.
fn decoder_layer_backward(
    d_out: &Array2<f64>,
    y_in: &Array2<f64>,
    memory: &Array2<f64>,
    cache: &DecoderLayerCache,
    p: &DecoderLayerParams,
    g: &mut DecoderLayerParams,
    heads: usize,
) -> (Array2<f64>, Array2<f64>) {
    let d_r3 = layer_norm_backward(d_out, &cache.ln3, &p.ln3, &mut g.ln3);
    g.ffn.w2 += &cache.h.t().dot(&d_r3);
    let mut d_h = d_r3.dot(&p.ffn.w2.t());
    for (dh, &h) in d_h.iter_mut().zip(cache.h.iter()) {
        if h <= 0.0 {
            *dh = 0.0;
        }
    }
    g.ffn.w1 += &cache.n2.t().dot(&d_h);
    let mut d_n2 = d_h.dot(&p.ffn.w1.t());
    d_n2 += &d_r3;

    let d_r2 = layer_norm_backward(&d_n2, &cache.ln2, &p.ln2, &mut g.ln2);
    let (d_n1_from_cross, d_memory) = attention_backward(
        &d_r2,
        &cache.n1,
        memory,
        &cache.cross_attn,
        &p.cross_attn,
        &mut g.cross_attn,
        heads,
    );
    let mut d_n1 = d_r2;
    d_n1 += &d_n1_from_cross;

    let d_r1 = layer_norm_backward(&d_n1, &cache.ln1, &p.ln1, &mut g.ln1);
    let (d_yq, d_ykv) = attention_backward(
        &d_r1,
        y_in,
        y_in,
        &cache.self_attn,
        &p.self_attn,
        &mut g.self_attn,
        heads,
    );
    let mut d_y = d_r1;
    d_y += &d_yq;
    d_y += &d_ykv;
    (d_y, d_memory)
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

impl Seq2SeqModel {
    /// Writes a versioned checkpoint with tensors stored as u64 bit patterns;
    /// loading reproduces the parameters bit-exactly.
    pub fn save(&self, path: &std::path::Path) -> Result<(), NeuralError> {
        let mut tensors = Vec::new();
        self.params.for_each_block(&mut |name, data| {
            tensors.push(TensorRecord {
                name: name.to_string(),
                len: data.len(),
                bits: data.iter().map(|x| x.to_bits()).collect(),
            });
        });
        let file = CheckpointFile {
            version: 1,
            config: self.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            tensors,
        };
        let text = serde_json::to_string(&file).expect("checkpoint serialization cannot fail");
        std::fs::write(path, text).map_err(|source| NeuralError::CheckpointIo {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|source| NeuralError::CheckpointIo {
            path: path.display().to_string(),
            source,
        })?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|source| NeuralError::CheckpointParse {
                path: path.display().to_string(),
                source,
            })?;
        if file.version != 1 {
            return Err(NeuralError::InvalidConfig(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        let vocab = Vocab::from_tokens(file.vocab);
        let mut model = Seq2SeqModel::new(file.config, vocab)?;
        let mut records: std::collections::BTreeMap<String, Vec<u64>> = file
            .tensors
            .into_iter()
            .map(|t| (t.name, t.bits))
            .collect();
        let mut missing = None;
        model.params.for_each_block_mut(&mut |name, data| {
            match records.remove(name) {
                Some(bits) if bits.len() == data.len() => {
                    for (x, b) in data.iter_mut().zip(bits) {
                        *x = f64::from_bits(b);
                    }
                }
                _ if missing.is_none() => missing = Some(name.to_string()),
                _ => {}
            }
        });
        if let Some(name) = missing {
            return Err(NeuralError::InvalidConfig(format!(
                "checkpoint tensor `{name}` missing or mis-shaped"
            )));
        }
        if !records.is_empty() {
            return Err(NeuralError::InvalidConfig(format!(
                "checkpoint has {} unexpected tensors",
                records.len()
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;

    fn tiny_pairs() -> Vec<TrainingPair> {
        vec![
            TrainingPair {
                direction: Direction::Fwd,
                input: toks("<task:fwd> <usr> hello there"),
                target: toks("<bs> [none] <db> [db_none] <resp> hi friend <eos>"),
                dialogue_id: "d0".into(),
                t: 0,
                j: 0,
            },
            TrainingPair {
                direction: Direction::B2c,
                input: toks("<task:b2c> [none] <db> [db_none]"),
                target: toks("hello there <eos>"),
                dialogue_id: "d0".into(),
                t: 0,
                j: 0,
            },
        ]
    }

    fn tiny_model(pairs: &[TrainingPair], zero_out: bool) -> (Seq2SeqModel, Batch) {
        let vocab = Vocab::build(pairs, 1).unwrap();
        let mut config = ModelConfig::sanity();
        config.zero_init_projection = zero_out;
        let refs: Vec<&TrainingPair> = pairs.iter().collect();
        let batch = Batch::from_pairs(&refs, &vocab, config.max_src_len, config.max_tgt_len);
        let model = Seq2SeqModel::new(config, vocab).unwrap();
        (model, batch)
    }

    #[test]
    fn uniform_logits_give_ln_vocab_loss() {
        let pairs = tiny_pairs();
        let (model, batch) = tiny_model(&pairs, true);
        let loss = model.nll(&batch).unwrap();
        let expected = (model.vocab.len() as f64).ln();
        assert!(
            (loss - expected).abs() < 1e-12,
            "loss {loss} vs ln|V| {expected}"
        );
    }

    #[test]
    fn duplicated_pair_has_same_loss_as_single() {
        let pairs = tiny_pairs();
        let (model, _) = tiny_model(&pairs, false);
        let single: Vec<&TrainingPair> = vec![&pairs[0]];
        let double: Vec<&TrainingPair> = vec![&pairs[0], &pairs[0]];
        let b1 = Batch::from_pairs(&single, &model.vocab, 64, 64);
        let b2 = Batch::from_pairs(&double, &model.vocab, 64, 64);
        let l1 = model.nll(&b1).unwrap();
        let l2 = model.nll(&b2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn empty_targets_give_zero_loss_and_zero_grads() {
        let pairs = tiny_pairs();
        let (model, _) = tiny_model(&pairs, false);
        let mut empty = pairs[0].clone();
        empty.target.clear();
        let refs = vec![&empty];
        let batch = Batch::from_pairs(&refs, &model.vocab, 64, 64);
        let (loss, grad) = model.grads(&batch).unwrap();
        assert_eq!(loss, 0.0);
        let mut all_zero = true;
        grad.for_each_block(&mut |_, data| all_zero &= data.iter().all(|&x| x == 0.0));
        assert!(all_zero);
    }

    #[test]
    fn untouched_embedding_rows_have_zero_gradient() {
        let pairs = tiny_pairs();
        let (model, _) = tiny_model(&pairs, false);
        let refs = vec![&pairs[0]];
        let batch = Batch::from_pairs(&refs, &model.vocab, 64, 64);
        let (_, grad) = model.grads(&batch).unwrap();
        let used: std::collections::BTreeSet<usize> = batch
            .input_row(0)
            .into_iter()
            .chain(std::iter::once(model.vocab.bos_id()))
            .chain(batch.target_row(0))
            .collect();
        for id in 0..model.vocab.len() {
            let row = grad.embedding.row(id);
            let zero = row.iter().all(|&x| x == 0.0);
            if used.contains(&id) {
                continue; // may or may not be zero
            }
            assert!(zero, "unused token id {id} has non-zero embedding gradient");
        }
    }

    #[test]
    fn batch_token_out_of_range_is_reported() {
        let pairs = tiny_pairs();
        let (model, batch) = tiny_model(&pairs, false);
        let mut bad = batch.clone();
        bad.input_ids[[0, 0]] = model.vocab.len() + 5;
        assert!(matches!(
            model.nll(&bad),
            Err(NeuralError::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn loss_decreases_under_gradient_descent_on_one_pair() {
        let pairs = tiny_pairs();
        let (mut model, _) = tiny_model(&pairs, false);
        let refs = vec![&pairs[0]];
        let batch = Batch::from_pairs(&refs, &model.vocab, 64, 64);
        let before = model.nll(&batch).unwrap();
        let mut last = before;
        for _ in 0..50 {
            let (_, grad) = model.grads(&batch).unwrap();
            let mut blocks = Vec::new();
            grad.for_each_block(&mut |_, data| blocks.push(data.to_vec()));
            let mut i = 0;
            model.params.for_each_block_mut(&mut |_, data| {
                for (p, g) in data.iter_mut().zip(&blocks[i]) {
                    *p -= 0.05 * g;
                }
                i += 1;
            });
            last = model.nll(&batch).unwrap();
        }
        assert!(
            last < before * 0.5,
            "loss should halve in 50 steps: {before} → {last}"
        );
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let pairs = tiny_pairs();
        let (model, batch) = tiny_model(&pairs, false);
        let file = tempfile::NamedTempFile::new().unwrap();
        model.save(file.path()).unwrap();
        let loaded = Seq2SeqModel::load(file.path()).unwrap();
        assert_eq!(model.params, loaded.params);
        assert_eq!(model.vocab, loaded.vocab);
        let a = model.nll(&batch).unwrap();
        let b = loaded.nll(&batch).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
