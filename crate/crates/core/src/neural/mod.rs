//! The compact trainable encoder-decoder shared across all task directions:
//! vocabulary, transformer stack, teacher-forced loss, exact gradients,
//! decoding, and a finite-difference gradient checker.
//!
//! Everything runs in f64. Training mutates parameters under a single-writer
//! contract; inference over a frozen model is pure and fans out across
//! workers freely.

mod decode;
mod gradcheck;
mod model;
mod params;
mod vocab;

use thiserror::Error;

pub use decode::{nucleus_sample, DecodeState, InferLimits, InferOutcome};
pub use model::{Batch, Seq2SeqModel};
pub use params::{ModelConfig, Params};
pub use vocab::{Vocab, BOS, EOS, PAD, RESERVED, UNK};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("cannot build a vocabulary from zero pairs")]
    EmptyPairs,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in `{block}`")]
    NonFinite { block: String },
    #[error("finite-difference epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("beam width must be at least 1, got {0}")]
    InvalidBeamWidth(usize),
    #[error("top-p must lie in (0, 1], got {0}")]
    InvalidTopP(f64),
    #[error("failed to write checkpoint {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse checkpoint {path}: {source}")]
    CheckpointParse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
