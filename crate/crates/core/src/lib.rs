//! Desk-scale laboratory for dual learning in end-to-end task-oriented dialogue.
//!
//! The pipeline runs entirely on CPU from synthetic corpora: dialogue data and
//! a simulated database ([`corpus`], [`kb`]), constraint-preserving paraphrase
//! expansion ([`augment`]), dual training-pair construction ([`dualdata`]), a
//! compact trainable encoder-decoder with exact gradients ([`neural`]),
//! optimization and study harnesses ([`train`]), and task-completion metrics
//! ([`eval`]).
//!
//! Data-parallel inner loops (batch gradients, per-dialogue scoring, study
//! cells) run on rayon when the default `parallel` feature is enabled and fall
//! back to sequential iteration otherwise; both paths produce bit-identical
//! results because every reduction happens in a fixed order.

pub mod augment;
pub mod corpus;
pub mod dualdata;
pub mod eval;
pub mod kb;
pub mod neural;
pub mod par;
pub mod train;

mod seed;

pub use seed::derive_seed;
