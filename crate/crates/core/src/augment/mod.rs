//! Constraint-preserving rewrites of utterances and responses, plus the EDA
//! and synonym-replacement baselines for augmenter comparisons.
//!
//! The rewriter is a deterministic synonym lattice explored by beam search
//! under a bigram fluency table, with dialogue-state values frozen and a
//! post-hoc constraint filter; the interface admits swapping in a neural
//! paraphraser later. Everything is pure in `(inputs, seed)`, so expansion
//! parallelizes across turns with per-turn derived seeds.

mod constraint;
mod expand;
mod rewrite;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraint::{constraint_check, ConstraintSet};
pub use expand::{expand_turn, expand_turn_with, ExpandedPair, ExpandedTurn, ParaphraseSet};
pub use rewrite::Paraphraser;

const BUNDLED_THESAURUS: &str = include_str!("../../assets/thesaurus.json");
const BUNDLED_BIGRAMS: &str = include_str!("../../assets/bigram_lm.json");

/// Log-probability assigned to bigrams absent from the fluency table.
const BIGRAM_FLOOR: f64 = -8.0;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Which rewriter produces the variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum AugmentStrategy {
    Para,
    Eda,
    Syn,
}

impl AugmentStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentStrategy::Para => "para",
            AugmentStrategy::Eda => "eda",
            AugmentStrategy::Syn => "syn",
        }
    }
}

impl std::str::FromStr for AugmentStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "para" => Ok(AugmentStrategy::Para),
            "eda" => Ok(AugmentStrategy::Eda),
            "syn" => Ok(AugmentStrategy::Syn),
            other => Err(format!("unknown augmentation strategy `{other}`")),
        }
    }
}

/// Token → alternatives map.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Thesaurus {
    entries: BTreeMap<String, Vec<String>>,
}

impl Thesaurus {
    /// The thesaurus shipped with the crate.
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_THESAURUS).expect("bundled thesaurus is valid JSON")
    }

    pub fn from_file(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| AugmentError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn alternatives(&self, token: &str) -> &[String] {
        self.entries.get(token).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Bigram log-probability table used to rank rewrite candidates.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FluencyTable {
    bigrams: BTreeMap<String, f64>,
}

impl FluencyTable {
    /// The fluency table shipped with the crate.
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_BIGRAMS).expect("bundled fluency table is valid JSON")
    }

    pub fn from_file(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| AugmentError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Log-probability of `cur` following `prev`, with a flat backoff floor.
    pub fn score(&self, prev: &str, cur: &str) -> f64 {
        self.bigrams
            .get(&format!("{prev} {cur}"))
            .copied()
            .unwrap_or(BIGRAM_FLOOR)
    }
}
