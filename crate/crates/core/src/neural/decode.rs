//! Decoding: incremental greedy, length-normalized beam search, nucleus
//! sampling, and the two-phase inference pipeline that splices live database
//! results into the decoder stream.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::model::{attention_forward, layer_norm_forward, Seq2SeqModel};
use super::NeuralError;
use crate::corpus::{parse_belief, BeliefState, Context};
use crate::dualdata::{DB_MARKER, RESP_MARKER, TASK_FWD};
use crate::kb::{query, DbResult, KnowledgeBase};

/// Incremental decoder state: encoder memory, per-layer cross-attention
/// projections (computed once), and growing self-attention key/value rows.
#[derive(Debug, Clone)]
pub struct DecodeState {
    cross_k: Vec<Array2<f64>>,
    cross_v: Vec<Array2<f64>>,
    self_k: Vec<Vec<f64>>,
    self_v: Vec<Vec<f64>>,
    pos: usize,
}

impl Seq2SeqModel {
    /// Runs the encoder and prepares an empty decoder state.
    pub fn decode_start(&self, src_ids: &[usize]) -> DecodeState {
        let mut src: Vec<usize> = src_ids.to_vec();
        src.truncate(self.config.max_src_len);
        let mut x = self.embed(&src);
        for layer in &self.params.encoder {
            let (next, _) = encoder_forward_nocache(&x, layer, self.config.heads);
            x = next;
        }
        let memory = x;
        let layers = self.params.decoder.len();
        let mut cross_k = Vec::with_capacity(layers);
        let mut cross_v = Vec::with_capacity(layers);
        for layer in &self.params.decoder {
            cross_k.push(memory.dot(&layer.cross_attn.wk));
            cross_v.push(memory.dot(&layer.cross_attn.wv));
        }
        DecodeState {
            cross_k,
            cross_v,
            self_k: vec![Vec::new(); layers],
            self_v: vec![Vec::new(); layers],
            pos: 0,
        }
    }

    /// Feeds one token and returns the logits for the next position.
    pub fn decode_step(&self, state: &mut DecodeState, token: usize) -> Vec<f64> {
        let d = self.config.d_model;
        let heads = self.config.heads;
        let dh = d / heads;
        let scale_attn = 1.0 / (dh as f64).sqrt();
        let embed_scale = (d as f64).sqrt();

        let pos = state.pos.min(self.positional.nrows() - 1);
        let mut x = Array2::zeros((1, d));
        for c in 0..d {
            x[[0, c]] = self.params.embedding[[token, c]] * embed_scale + self.positional[[pos, c]];
        }

        for (l, layer) in self.params.decoder.iter().enumerate() {
            // Causal self-attention over the cached prefix plus this token.
            let q = x.dot(&layer.self_attn.wq);
            let k_new = x.dot(&layer.self_attn.wk);
            let v_new = x.dot(&layer.self_attn.wv);
            state.self_k[l].extend(k_new.iter());
            state.self_v[l].extend(v_new.iter());
            let t = state.self_k[l].len() / d;
            let k_all = ArrayView2::from_shape((t, d), &state.self_k[l]).expect("kv cache layout");
            let v_all = ArrayView2::from_shape((t, d), &state.self_v[l]).expect("kv cache layout");

            let mut self_out = Array2::zeros((1, d));
            let mut concat = Array2::zeros((1, d));
            for h in 0..heads {
                let lo = h * dh;
                let hi = lo + dh;
                let mut weights = Array1::zeros(t);
                for row in 0..t {
                    let mut score = 0.0;
                    for c in lo..hi {
                        score += q[[0, c]] * k_all[[row, c]];
                    }
                    weights[row] = score * scale_attn;
                }
                softmax_inplace(&mut weights);
                for c in lo..hi {
                    let mut acc = 0.0;
                    for row in 0..t {
                        acc += weights[row] * v_all[[row, c]];
                    }
                    concat[[0, c]] = acc;
                }
            }
            self_out.assign(&concat.dot(&layer.self_attn.wo));

            let r1 = &x + &self_out;
            let (n1, _) = layer_norm_forward(&r1, &layer.ln1);

            // Cross-attention against the precomputed memory projections.
            let q2 = n1.dot(&layer.cross_attn.wq);
            let k_mem = &state.cross_k[l];
            let v_mem = &state.cross_v[l];
            let s = k_mem.nrows();
            let mut concat2 = Array2::zeros((1, d));
            for h in 0..heads {
                let lo = h * dh;
                let hi = lo + dh;
                let mut weights = Array1::zeros(s);
                for row in 0..s {
                    let mut score = 0.0;
                    for c in lo..hi {
                        score += q2[[0, c]] * k_mem[[row, c]];
                    }
                    weights[row] = score * scale_attn;
                }
                softmax_inplace(&mut weights);
                for c in lo..hi {
                    let mut acc = 0.0;
                    for row in 0..s {
                        acc += weights[row] * v_mem[[row, c]];
                    }
                    concat2[[0, c]] = acc;
                }
            }
            let cross_out = concat2.dot(&layer.cross_attn.wo);

            let r2 = &n1 + &cross_out;
            let (n2, _) = layer_norm_forward(&r2, &layer.ln2);
            let mut hcol = n2.dot(&layer.ffn.w1);
            hcol.mapv_inplace(|v| v.max(0.0));
            let f = hcol.dot(&layer.ffn.w2);
            let r3 = &n2 + &f;
            let (n3, _) = layer_norm_forward(&r3, &layer.ln3);
            x = n3;
        }

        state.pos += 1;
        x.dot(&self.params.output).row(0).to_vec()
    }

    /// Greedy decoding: argmax per step, stopping at `<eos>` or `max_len`.
    /// The returned ids exclude `<eos>`.
    pub fn greedy_decode(&self, src_ids: &[usize], max_len: usize) -> Vec<usize> {
        let max_len = max_len.min(self.config.max_tgt_len);
        let mut state = self.decode_start(src_ids);
        let mut prev = self.vocab.bos_id();
        let mut out = Vec::new();
        for _ in 0..max_len {
            let logits = self.decode_step(&mut state, prev);
            let next = argmax(&logits);
            if next == self.vocab.eos_id() {
                break;
            }
            out.push(next);
            prev = next;
        }
        out
    }

    /// Length-normalized beam search returning the best hypothesis.
    ///
    /// Scores are summed token log-probabilities divided by the number of
    /// decode steps (a final `<eos>` counts as a step); ties break toward the
    /// lexicographically smaller id sequence. Width 1 reduces to greedy.
    pub fn beam_decode(
        &self,
        src_ids: &[usize],
        width: usize,
        max_len: usize,
    ) -> Result<Vec<usize>, NeuralError> {
        if width == 0 {
            return Err(NeuralError::InvalidBeamWidth(width));
        }
        let max_len = max_len.min(self.config.max_tgt_len);
        if max_len == 0 {
            return Ok(Vec::new());
        }
        let eos = self.vocab.eos_id();

        struct Hypothesis {
            tokens: Vec<usize>,
            logprob: f64,
            state: DecodeState,
            prev: usize,
        }
        struct Finished {
            tokens: Vec<usize>,
            logprob: f64,
            steps: usize,
        }

        let mut active = vec![Hypothesis {
            tokens: Vec::new(),
            logprob: 0.0,
            state: self.decode_start(src_ids),
            prev: self.vocab.bos_id(),
        }];
        let mut finished: Vec<Finished> = Vec::new();

        for _ in 0..max_len {
            if active.is_empty() {
                break;
            }
            // (cumulative logprob, tokens, source hypothesis, chosen token)
            let mut candidates: Vec<(f64, Vec<usize>, usize, usize)> = Vec::new();
            let mut stepped: Vec<(DecodeState, Vec<usize>)> = Vec::new();
            for (i, hyp) in active.iter_mut().enumerate() {
                let logits = self.decode_step(&mut hyp.state, hyp.prev);
                let logp = log_softmax(&logits);
                stepped.push((hyp.state.clone(), hyp.tokens.clone()));
                for (v, &lp) in logp.iter().enumerate() {
                    let mut tokens = hyp.tokens.clone();
                    tokens.push(v);
                    candidates.push((hyp.logprob + lp, tokens, i, v));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            candidates.truncate(width);

            let mut next_active = Vec::new();
            for (logprob, tokens, source, token) in candidates {
                if token == eos {
                    finished.push(Finished {
                        tokens: stepped[source].1.clone(),
                        logprob,
                        steps: stepped[source].1.len() + 1,
                    });
                } else {
                    next_active.push(Hypothesis {
                        tokens,
                        logprob,
                        state: stepped[source].0.clone(),
                        prev: token,
                    });
                }
            }
            active = next_active;
        }

        for hyp in active {
            if !hyp.tokens.is_empty() {
                finished.push(Finished {
                    steps: hyp.tokens.len(),
                    tokens: hyp.tokens,
                    logprob: hyp.logprob,
                });
            }
        }
        finished.sort_by(|a, b| {
            let sa = a.logprob / a.steps as f64;
            let sb = b.logprob / b.steps as f64;
            sb.total_cmp(&sa).then_with(|| a.tokens.cmp(&b.tokens))
        });
        Ok(finished.into_iter().next().map(|f| f.tokens).unwrap_or_default())
    }

    /// Nucleus sampling: at each step, sample from the smallest set of
    /// probability-sorted tokens with cumulative mass ≥ p, renormalized.
    pub fn top_p_decode(
        &self,
        src_ids: &[usize],
        p: f64,
        seed: u64,
        max_len: usize,
    ) -> Result<Vec<usize>, NeuralError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(NeuralError::InvalidTopP(p));
        }
        let max_len = max_len.min(self.config.max_tgt_len);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut state = self.decode_start(src_ids);
        let mut prev = self.vocab.bos_id();
        let mut out = Vec::new();
        for _ in 0..max_len {
            let logits = self.decode_step(&mut state, prev);
            let probs = softmax_vec(&logits);
            let next = nucleus_sample(&probs, p, &mut rng);
            if next == self.vocab.eos_id() {
                break;
            }
            out.push(next);
            prev = next;
        }
        Ok(out)
    }
}

/// Samples from the nucleus of a probability vector: the smallest prefix of
/// probability-sorted tokens (ties toward smaller index) whose cumulative
/// mass reaches `p`, renormalized.
pub fn nucleus_sample(probs: &[f64], p: f64, rng: &mut ChaCha20Rng) -> usize {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then_with(|| a.cmp(&b)));
    let mut nucleus_len = 0;
    let mut mass = 0.0;
    for &i in &order {
        nucleus_len += 1;
        mass += probs[i];
        if mass >= p {
            break;
        }
    }
    let u: f64 = rng.random_range(0.0..1.0) * mass;
    let mut cumulative = 0.0;
    for &i in &order[..nucleus_len] {
        cumulative += probs[i];
        if u < cumulative {
            return i;
        }
    }
    order[nucleus_len - 1]
}

/// Outcome of two-phase inference over one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct InferOutcome {
    pub belief: BeliefState,
    pub db: DbResult,
    pub response: Vec<String>,
}

/// Decode-length caps for two-phase inference.
#[derive(Debug, Clone, Copy)]
pub struct InferLimits {
    pub max_belief_len: usize,
    pub max_response_len: usize,
}

impl Default for InferLimits {
    fn default() -> Self {
        Self {
            max_belief_len: 64,
            max_response_len: 80,
        }
    }
}

impl Seq2SeqModel {
    /// Two-phase inference: decode the belief span until the `<db>` marker,
    /// query the live knowledge base, splice the real database tokens into
    /// the decoder stream, and continue decoding the response.
    ///
    /// Lenient by contract: unparseable belief spans degrade to the empty
    /// belief, and the spliced bucket always reflects the live query rather
    /// than whatever bucket the model would have produced.
    pub fn two_phase_infer(
        &self,
        context: &Context,
        kb: &KnowledgeBase,
        limits: InferLimits,
    ) -> InferOutcome {
        let mut input = vec![TASK_FWD.to_string()];
        input.extend(context.to_tokens());
        let src_ids = self.vocab.encode(&input);
        let eos = self.vocab.eos_id();
        let db_id = self.vocab.known_id(DB_MARKER);
        let resp_id = self.vocab.known_id(RESP_MARKER);

        let mut state = self.decode_start(&src_ids);
        let mut prev = self.vocab.bos_id();
        let mut belief_ids = Vec::new();
        for _ in 0..limits.max_belief_len {
            let logits = self.decode_step(&mut state, prev);
            let next = argmax(&logits);
            if next == db_id || next == eos {
                break;
            }
            belief_ids.push(next);
            prev = next;
        }
        let belief_tokens = self.vocab.decode(&belief_ids);
        let belief = parse_belief(&belief_tokens);
        let db = query(kb, &belief);

        // Splice the real database tokens, overriding the model's own bucket.
        let _ = self.decode_step(&mut state, db_id);
        let bucket_id = self.vocab.known_id(db.bucket.token());
        let mut logits = self.decode_step(&mut state, bucket_id);

        let mut response_ids = Vec::new();
        for _ in 0..limits.max_response_len {
            let next = argmax(&logits);
            if next == eos {
                break;
            }
            response_ids.push(next);
            logits = self.decode_step(&mut state, next);
        }
        if response_ids.first() == Some(&resp_id) {
            response_ids.remove(0);
        }
        InferOutcome {
            belief,
            db,
            response: self.vocab.decode(&response_ids),
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    best
}

fn softmax_inplace(x: &mut Array1<f64>) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in x.iter_mut() {
        *v /= z;
    }
}

fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + z.ln();
    logits.iter().map(|&v| v - lse).collect()
}

fn encoder_forward_nocache(
    x: &Array2<f64>,
    layer: &crate::neural::params::EncoderLayerParams,
    heads: usize,
) -> (Array2<f64>, ()) {
    let (attn_out, _) = attention_forward(x, x, &layer.attn, heads, false);
    let r1 = x + &attn_out;
    let (n1, _) = layer_norm_forward(&r1, &layer.ln1);
    let mut h = n1.dot(&layer.ffn.w1);
    h.mapv_inplace(|v| v.max(0.0));
    let f = h.dot(&layer.ffn.w2);
    let r2 = &n1 + &f;
    let (n2, _) = layer_norm_forward(&r2, &layer.ln2);
    (n2, ())
}
