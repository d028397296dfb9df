//! Parameter storage: shapes, initialization, block iteration, arithmetic.
//!
//! One `Params` value doubles as the model's weights, a gradient set, and the
//! optimizer's moment estimates; blocks always enumerate in the same order so
//! zipped walks across instances line up.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Hyper-shape of the encoder-decoder stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder layer count; the decoder uses the same number.
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    /// Zero the output projection at init, giving exactly uniform logits.
    pub zero_init_projection: bool,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Default desk-scale stack: 2+2 layers, width 64, 4 heads, FFN 128.
    pub fn tiny() -> Self {
        Self {
            layers: 2,
            d_model: 64,
            heads: 4,
            d_ff: 128,
            max_src_len: 512,
            max_tgt_len: 200,
            zero_init_projection: false,
            init_seed: 0x5eed,
        }
    }

    /// Small stack for gradient checking (well under 10k parameters with a
    /// small vocabulary).
    pub fn sanity() -> Self {
        Self {
            layers: 1,
            d_model: 8,
            heads: 2,
            d_ff: 16,
            max_src_len: 64,
            max_tgt_len: 64,
            zero_init_projection: false,
            init_seed: 0x5eed,
        }
    }

    /// One layer of width 4: the smallest stack that still exercises every
    /// component once.
    pub fn linear_sanity() -> Self {
        Self {
            layers: 1,
            d_model: 4,
            heads: 1,
            d_ff: 8,
            max_src_len: 32,
            max_tgt_len: 32,
            zero_init_projection: false,
            init_seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layers == 0 || self.d_model == 0 || self.heads == 0 || self.d_ff == 0 {
            return Err(NeuralError::InvalidConfig(
                "layers, d_model, heads, and d_ff must be positive".into(),
            ));
        }
        if self.d_model % self.heads != 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerParams {
    pub attn: AttentionParams,
    pub ln1: LayerNormParams,
    pub ffn: FeedForwardParams,
    pub ln2: LayerNormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerParams {
    pub self_attn: AttentionParams,
    pub ln1: LayerNormParams,
    pub cross_attn: AttentionParams,
    pub ln2: LayerNormParams,
    pub ffn: FeedForwardParams,
    pub ln3: LayerNormParams,
}

/// The full parameter store shared by all three task directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Array2<f64>,
    pub encoder: Vec<EncoderLayerParams>,
    pub decoder: Vec<DecoderLayerParams>,
    pub output: Array2<f64>,
}

fn lecun_uniform(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> Array2<f64> {
    // Fan-in scaled uniform: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
    let bound = (3.0 / rows as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn layer_norm_init(dim: usize) -> LayerNormParams {
    LayerNormParams {
        gamma: Array1::ones(dim),
        beta: Array1::zeros(dim),
    }
}

fn attention_init(d: usize, rng: &mut ChaCha20Rng) -> AttentionParams {
    AttentionParams {
        wq: lecun_uniform(d, d, rng),
        wk: lecun_uniform(d, d, rng),
        wv: lecun_uniform(d, d, rng),
        wo: lecun_uniform(d, d, rng),
    }
}

fn ffn_init(d: usize, f: usize, rng: &mut ChaCha20Rng) -> FeedForwardParams {
    FeedForwardParams {
        w1: lecun_uniform(d, f, rng),
        w2: lecun_uniform(f, d, rng),
    }
}

impl Params {
    /// Fresh parameters for `(config, vocab_size)`, deterministic in
    /// `config.init_seed`.
    pub fn init(config: &ModelConfig, vocab_size: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(config.init_seed);
        let d = config.d_model;
        let embedding = lecun_uniform(vocab_size, d, &mut rng);
        let encoder = (0..config.layers)
            .map(|_| EncoderLayerParams {
                attn: attention_init(d, &mut rng),
                ln1: layer_norm_init(d),
                ffn: ffn_init(d, config.d_ff, &mut rng),
                ln2: layer_norm_init(d),
            })
            .collect();
        let decoder = (0..config.layers)
            .map(|_| DecoderLayerParams {
                self_attn: attention_init(d, &mut rng),
                ln1: layer_norm_init(d),
                cross_attn: attention_init(d, &mut rng),
                ln2: layer_norm_init(d),
                ffn: ffn_init(d, config.d_ff, &mut rng),
                ln3: layer_norm_init(d),
            })
            .collect();
        let output = if config.zero_init_projection {
            Array2::zeros((d, vocab_size))
        } else {
            lecun_uniform(d, vocab_size, &mut rng)
        };
        Self {
            embedding,
            encoder,
            decoder,
            output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_block_mut(&mut |_, data| data.fill(0.0));
        out
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_block(&mut |_, data| n += data.len());
        n
    }

    /// Enumerates `(name, slice)` for every block in a fixed order.
    pub fn for_each_block(&self, f: &mut impl FnMut(&str, &[f64])) {
        f("embedding", self.embedding.as_slice().expect("standard layout"));
        for (l, layer) in self.encoder.iter().enumerate() {
            let p = format!("encoder.{l}");
            f(&format!("{p}.attn.wq"), layer.attn.wq.as_slice().unwrap());
            f(&format!("{p}.attn.wk"), layer.attn.wk.as_slice().unwrap());
            f(&format!("{p}.attn.wv"), layer.attn.wv.as_slice().unwrap());
            f(&format!("{p}.attn.wo"), layer.attn.wo.as_slice().unwrap());
            f(&format!("{p}.ln1.gamma"), layer.ln1.gamma.as_slice().unwrap());
            f(&format!("{p}.ln1.beta"), layer.ln1.beta.as_slice().unwrap());
            f(&format!("{p}.ffn.w1"), layer.ffn.w1.as_slice().unwrap());
            f(&format!("{p}.ffn.w2"), layer.ffn.w2.as_slice().unwrap());
            f(&format!("{p}.ln2.gamma"), layer.ln2.gamma.as_slice().unwrap());
            f(&format!("{p}.ln2.beta"), layer.ln2.beta.as_slice().unwrap());
        }
        for (l, layer) in self.decoder.iter().enumerate() {
            let p = format!("decoder.{l}");
            f(&format!("{p}.self.wq"), layer.self_attn.wq.as_slice().unwrap());
            f(&format!("{p}.self.wk"), layer.self_attn.wk.as_slice().unwrap());
            f(&format!("{p}.self.wv"), layer.self_attn.wv.as_slice().unwrap());
            f(&format!("{p}.self.wo"), layer.self_attn.wo.as_slice().unwrap());
            f(&format!("{p}.ln1.gamma"), layer.ln1.gamma.as_slice().unwrap());
            f(&format!("{p}.ln1.beta"), layer.ln1.beta.as_slice().unwrap());
            f(&format!("{p}.cross.wq"), layer.cross_attn.wq.as_slice().unwrap());
            f(&format!("{p}.cross.wk"), layer.cross_attn.wk.as_slice().unwrap());
            f(&format!("{p}.cross.wv"), layer.cross_attn.wv.as_slice().unwrap());
            f(&format!("{p}.cross.wo"), layer.cross_attn.wo.as_slice().unwrap());
            f(&format!("{p}.ln2.gamma"), layer.ln2.gamma.as_slice().unwrap());
            f(&format!("{p}.ln2.beta"), layer.ln2.beta.as_slice().unwrap());
            f(&format!("{p}.ffn.w1"), layer.ffn.w1.as_slice().unwrap());
            f(&format!("{p}.ffn.w2"), layer.ffn.w2.as_slice().unwrap());
            f(&format!("{p}.ln3.gamma"), layer.ln3.gamma.as_slice().unwrap());
            f(&format!("{p}.ln3.beta"), layer.ln3.beta.as_slice().unwrap());
        }
        f("output", self.output.as_slice().unwrap());
    }

    /// Mutable counterpart of [`Params::for_each_block`], same order.
    pub fn for_each_block_mut(&mut self, f: &mut impl FnMut(&str, &mut [f64])) {
        f("embedding", self.embedding.as_slice_mut().expect("standard layout"));
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            let p = format!("encoder.{l}");
            f(&format!("{p}.attn.wq"), layer.attn.wq.as_slice_mut().unwrap());
            f(&format!("{p}.attn.wk"), layer.attn.wk.as_slice_mut().unwrap());
            f(&format!("{p}.attn.wv"), layer.attn.wv.as_slice_mut().unwrap());
            f(&format!("{p}.attn.wo"), layer.attn.wo.as_slice_mut().unwrap());
            f(&format!("{p}.ln1.gamma"), layer.ln1.gamma.as_slice_mut().unwrap());
            f(&format!("{p}.ln1.beta"), layer.ln1.beta.as_slice_mut().unwrap());
            f(&format!("{p}.ffn.w1"), layer.ffn.w1.as_slice_mut().unwrap());
            f(&format!("{p}.ffn.w2"), layer.ffn.w2.as_slice_mut().unwrap());
            f(&format!("{p}.ln2.gamma"), layer.ln2.gamma.as_slice_mut().unwrap());
            f(&format!("{p}.ln2.beta"), layer.ln2.beta.as_slice_mut().unwrap());
        }
        for (l, layer) in self.decoder.iter_mut().enumerate() {
            let p = format!("decoder.{l}");
            f(&format!("{p}.self.wq"), layer.self_attn.wq.as_slice_mut().unwrap());
            f(&format!("{p}.self.wk"), layer.self_attn.wk.as_slice_mut().unwrap());
            f(&format!("{p}.self.wv"), layer.self_attn.wv.as_slice_mut().unwrap());
            f(&format!("{p}.self.wo"), layer.self_attn.wo.as_slice_mut().unwrap());
            f(&format!("{p}.ln1.gamma"), layer.ln1.gamma.as_slice_mut().unwrap());
            f(&format!("{p}.ln1.beta"), layer.ln1.beta.as_slice_mut().unwrap());
            f(&format!("{p}.cross.wq"), layer.cross_attn.wq.as_slice_mut().unwrap());
            f(&format!("{p}.cross.wk"), layer.cross_attn.wk.as_slice_mut().unwrap());
            f(&format!("{p}.cross.wv"), layer.cross_attn.wv.as_slice_mut().unwrap());
            f(&format!("{p}.cross.wo"), layer.cross_attn.wo.as_slice_mut().unwrap());
            f(&format!("{p}.ln2.gamma"), layer.ln2.gamma.as_slice_mut().unwrap());
            f(&format!("{p}.ln2.beta"), layer.ln2.beta.as_slice_mut().unwrap());
            f(&format!("{p}.ffn.w1"), layer.ffn.w1.as_slice_mut().unwrap());
            f(&format!("{p}.ffn.w2"), layer.ffn.w2.as_slice_mut().unwrap());
            f(&format!("{p}.ln3.gamma"), layer.ln3.gamma.as_slice_mut().unwrap());
            f(&format!("{p}.ln3.beta"), layer.ln3.beta.as_slice_mut().unwrap());
        }
        f("output", self.output.as_slice_mut().unwrap());
    }

    /// Unnamed block slices in visitor order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.push(self.embedding.as_slice().expect("standard layout"));
        for layer in &self.encoder {
            out.push(layer.attn.wq.as_slice().unwrap());
            out.push(layer.attn.wk.as_slice().unwrap());
            out.push(layer.attn.wv.as_slice().unwrap());
            out.push(layer.attn.wo.as_slice().unwrap());
            out.push(layer.ln1.gamma.as_slice().unwrap());
            out.push(layer.ln1.beta.as_slice().unwrap());
            out.push(layer.ffn.w1.as_slice().unwrap());
            out.push(layer.ffn.w2.as_slice().unwrap());
            out.push(layer.ln2.gamma.as_slice().unwrap());
            out.push(layer.ln2.beta.as_slice().unwrap());
        }
        for layer in &self.decoder {
            out.push(layer.self_attn.wq.as_slice().unwrap());
            out.push(layer.self_attn.wk.as_slice().unwrap());
            out.push(layer.self_attn.wv.as_slice().unwrap());
            out.push(layer.self_attn.wo.as_slice().unwrap());
            out.push(layer.ln1.gamma.as_slice().unwrap());
            out.push(layer.ln1.beta.as_slice().unwrap());
            out.push(layer.cross_attn.wq.as_slice().unwrap());
            out.push(layer.cross_attn.wk.as_slice().unwrap());
            out.push(layer.cross_attn.wv.as_slice().unwrap());
            out.push(layer.cross_attn.wo.as_slice().unwrap());
            out.push(layer.ln2.gamma.as_slice().unwrap());
            out.push(layer.ln2.beta.as_slice().unwrap());
            out.push(layer.ffn.w1.as_slice().unwrap());
            out.push(layer.ffn.w2.as_slice().unwrap());
            out.push(layer.ln3.gamma.as_slice().unwrap());
            out.push(layer.ln3.beta.as_slice().unwrap());
        }
        out.push(self.output.as_slice().unwrap());
        out
    }

    /// Mutable unnamed block slices in visitor order.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.push(self.embedding.as_slice_mut().expect("standard layout"));
        for layer in self.encoder.iter_mut() {
            out.push(layer.attn.wq.as_slice_mut().unwrap());
            out.push(layer.attn.wk.as_slice_mut().unwrap());
            out.push(layer.attn.wv.as_slice_mut().unwrap());
            out.push(layer.attn.wo.as_slice_mut().unwrap());
            out.push(layer.ln1.gamma.as_slice_mut().unwrap());
            out.push(layer.ln1.beta.as_slice_mut().unwrap());
            out.push(layer.ffn.w1.as_slice_mut().unwrap());
            out.push(layer.ffn.w2.as_slice_mut().unwrap());
            out.push(layer.ln2.gamma.as_slice_mut().unwrap());
            out.push(layer.ln2.beta.as_slice_mut().unwrap());
        }
        for layer in self.decoder.iter_mut() {
            out.push(layer.self_attn.wq.as_slice_mut().unwrap());
            out.push(layer.self_attn.wk.as_slice_mut().unwrap());
            out.push(layer.self_attn.wv.as_slice_mut().unwrap());
            out.push(layer.self_attn.wo.as_slice_mut().unwrap());
            out.push(layer.ln1.gamma.as_slice_mut().unwrap());
            out.push(layer.ln1.beta.as_slice_mut().unwrap());
            out.push(layer.cross_attn.wq.as_slice_mut().unwrap());
            out.push(layer.cross_attn.wk.as_slice_mut().unwrap());
            out.push(layer.cross_attn.wv.as_slice_mut().unwrap());
            out.push(layer.cross_attn.wo.as_slice_mut().unwrap());
            out.push(layer.ln2.gamma.as_slice_mut().unwrap());
            out.push(layer.ln2.beta.as_slice_mut().unwrap());
            out.push(layer.ffn.w1.as_slice_mut().unwrap());
            out.push(layer.ffn.w2.as_slice_mut().unwrap());
            out.push(layer.ln3.gamma.as_slice_mut().unwrap());
            out.push(layer.ln3.beta.as_slice_mut().unwrap());
        }
        out.push(self.output.as_slice_mut().unwrap());
        out
    }

    /// `self += other`, blockwise.
    pub fn add_assign(&mut self, other: &Params) {
        let rhs = other.blocks();
        for (mine, theirs) in self.blocks_mut().into_iter().zip(rhs) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    /// `self *= scale`, blockwise.
    pub fn scale(&mut self, factor: f64) {
        self.for_each_block_mut(&mut |_, data| {
            for x in data {
                *x *= factor;
            }
        });
    }

    /// Name of the first block holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        let mut found = None;
        self.for_each_block(&mut |name, data| {
            if found.is_none() && data.iter().any(|x| !x.is_finite()) {
                found = Some(name.to_string());
            }
        });
        found
    }
}
