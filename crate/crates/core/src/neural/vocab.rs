//! Token ↔ id vocabulary with reserved structural tokens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::dualdata::TrainingPair;

pub const PAD: &str = "<pad>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";

/// Reserved tokens in id order; `<pad>` is always id 0.
pub const RESERVED: &[&str] = &[
    PAD,
    EOS,
    UNK,
    BOS,
    "<usr>",
    "<sys>",
    "<task:fwd>",
    "<task:b2c>",
    "<task:r2c>",
    "<bs>",
    "<db>",
    "<resp>",
    "[none]",
    "[db_0]",
    "[db_1]",
    "[db_2]",
    "[db_3plus]",
    "[db_none]",
];

/// Bijective token ↔ id map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from training pairs.
    ///
    /// Reserved tokens come first in fixed order; the rest are ordered by
    /// frequency (descending), ties broken lexicographically. Tokens below
    /// `min_count` are dropped unless they are `[value_*]` placeholders,
    /// which are always kept.
    pub fn build(pairs: &[TrainingPair], min_count: usize) -> Result<Self, NeuralError> {
        if pairs.is_empty() {
            return Err(NeuralError::EmptyPairs);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for pair in pairs {
            for token in pair.input.iter().chain(&pair.target) {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut rest: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(token, _)| !RESERVED.contains(token))
            .filter(|(token, count)| *count >= min_count || token.starts_with("[value_"))
            .collect();
        rest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|t| t.to_string())
            .chain(rest.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Ok(Self::from_tokens(tokens))
    }

    /// Rebuilds a vocabulary from an ordered token list (checkpoint load).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn eos_id(&self) -> usize {
        1
    }

    pub fn unk_id(&self) -> usize {
        2
    }

    pub fn bos_id(&self) -> usize {
        3
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(self.unk_id())
    }

    /// Id of a token that must exist (structural markers).
    pub fn known_id(&self, token: &str) -> usize {
        *self
            .ids
            .get(token)
            .unwrap_or_else(|| panic!("reserved token `{token}` missing from vocab"))
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}
