//! The rewriters: synonym-lattice paraphrasing explored by beam search, plus
//! the EDA and per-token synonym-replacement baselines.
//!
//! All three protect constraint tokens from modification, post-filter with
//! `constraint_check`, and are fully determined by their inputs and seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::constraint::{constraint_check, constraint_spans, frozen_mask, ConstraintSet};
use super::{FluencyTable, Thesaurus};
use crate::seed::derive_seed;

/// Scale of the seed-derived score jitter: small enough that real bigram
/// differences dominate, large enough to break ties between equal-fluency
/// candidates.
const JITTER_SCALE: f64 = 0.05;

/// Per-token substitution probability for the SYN baseline.
const SYN_PROB: f64 = 0.25;

/// Deterministic rewriter backed by a thesaurus and a bigram fluency table.
#[derive(Debug, Clone)]
pub struct Paraphraser {
    pub thesaurus: Thesaurus,
    pub fluency: FluencyTable,
}

impl Default for Paraphraser {
    fn default() -> Self {
        Self {
            thesaurus: Thesaurus::bundled(),
            fluency: FluencyTable::bundled(),
        }
    }
}

impl Paraphraser {
    pub fn new(thesaurus: Thesaurus, fluency: FluencyTable) -> Self {
        Self { thesaurus, fluency }
    }

    /// Generates up to `k` paraphrase candidates ordered by fluency score.
    ///
    /// Builds a per-token alternative lattice (constraint spans and
    /// structural tokens frozen), explores it with beam search scored by
    /// bigram log-probabilities plus seed-derived jitter, and filters out the
    /// original, duplicates, and anything failing `constraint_check`. May
    /// return fewer than `k` candidates, possibly none.
    pub fn paraphrase(
        &self,
        utterance: &[String],
        constraints: &ConstraintSet,
        k: usize,
        seed: u64,
    ) -> Vec<Vec<String>> {
        if k == 0 || utterance.is_empty() {
            return Vec::new();
        }
        let frozen = frozen_mask(utterance, constraints);
        let lattice: Vec<Vec<&str>> = utterance
            .iter()
            .zip(&frozen)
            .map(|(token, &is_frozen)| {
                let mut alts = vec![token.as_str()];
                if !is_frozen {
                    alts.extend(
                        self.thesaurus
                            .alternatives(token)
                            .iter()
                            .map(String::as_str),
                    );
                }
                alts
            })
            .collect();
        if lattice.iter().all(|alts| alts.len() == 1) {
            return Vec::new(); // nothing rewritable
        }

        let width = (k + 1).max(8) * 2;
        let mut beam: Vec<(f64, Vec<&str>)> = vec![(0.0, Vec::new())];
        for (pos, alts) in lattice.iter().enumerate() {
            let mut next: Vec<(f64, Vec<&str>)> = Vec::with_capacity(beam.len() * alts.len());
            for (score, prefix) in &beam {
                let prev = prefix.last().copied().unwrap_or("<s>");
                for (alt_index, alt) in alts.iter().enumerate() {
                    let jitter = unit_float(derive_seed(
                        seed,
                        &[&pos.to_string(), &alt_index.to_string(), alt],
                    ));
                    let step = self.fluency.score(prev, alt) + JITTER_SCALE * jitter;
                    let mut tokens = prefix.clone();
                    tokens.push(alt);
                    next.push((score + step, tokens));
                }
            }
            next.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            next.truncate(width);
            beam = next;
        }

        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (_, tokens) in beam {
            let candidate: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
            if candidate == utterance {
                continue;
            }
            if !constraint_check(&candidate, constraints) {
                continue;
            }
            if seen.insert(candidate.clone()) {
                out.push(candidate);
                if out.len() == k {
                    break;
                }
            }
        }
        out
    }

    /// Applies one random EDA operation (swap, deletion, insertion, or
    /// synonym substitution) with constraint tokens protected. Returns the
    /// input unchanged when no operation is applicable.
    pub fn eda(&self, utterance: &[String], constraints: &ConstraintSet, seed: u64) -> Vec<String> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let frozen = frozen_mask(utterance, constraints);
        let mutable: Vec<usize> = (0..utterance.len()).filter(|&i| !frozen[i]).collect();
        let first_op = rng.random_range(0..4u8);
        for attempt in 0..4u8 {
            let candidate = match (first_op + attempt) % 4 {
                0 => self.eda_swap(utterance, &mutable, &mut rng),
                1 => self.eda_delete(utterance, &mutable, &mut rng),
                2 => self.eda_insert(utterance, constraints, &mutable, &mut rng),
                _ => self.eda_synonym(utterance, &mutable, &mut rng),
            };
            if let Some(candidate) = candidate {
                if constraint_check(&candidate, constraints) {
                    return candidate;
                }
            }
        }
        utterance.to_vec()
    }

    fn eda_swap(
        &self,
        tokens: &[String],
        mutable: &[usize],
        rng: &mut ChaCha20Rng,
    ) -> Option<Vec<String>> {
        if mutable.len() < 2 {
            return None;
        }
        let a = mutable[rng.random_range(0..mutable.len())];
        let mut b = a;
        // Mutable positions are distinct; resample until the pair differs in content
        // or we run out of tries (identical tokens make swaps invisible).
        for _ in 0..8 {
            b = mutable[rng.random_range(0..mutable.len())];
            if tokens[a] != tokens[b] {
                break;
            }
        }
        if tokens[a] == tokens[b] {
            return None;
        }
        let mut out = tokens.to_vec();
        out.swap(a, b);
        Some(out)
    }

    fn eda_delete(
        &self,
        tokens: &[String],
        mutable: &[usize],
        rng: &mut ChaCha20Rng,
    ) -> Option<Vec<String>> {
        if mutable.is_empty() || tokens.len() < 2 {
            return None;
        }
        let victim = mutable[rng.random_range(0..mutable.len())];
        let mut out = tokens.to_vec();
        out.remove(victim);
        Some(out)
    }

    fn eda_insert(
        &self,
        tokens: &[String],
        constraints: &ConstraintSet,
        mutable: &[usize],
        rng: &mut ChaCha20Rng,
    ) -> Option<Vec<String>> {
        let sources: Vec<usize> = mutable
            .iter()
            .copied()
            .filter(|&i| !self.thesaurus.alternatives(&tokens[i]).is_empty())
            .collect();
        if sources.is_empty() {
            return None;
        }
        let source = sources[rng.random_range(0..sources.len())];
        let alts = self.thesaurus.alternatives(&tokens[source]);
        let word = alts[rng.random_range(0..alts.len())].clone();
        let spans = constraint_spans(tokens, constraints);
        let positions: Vec<usize> = (0..=tokens.len())
            .filter(|&p| !spans.iter().any(|&(s, e)| s < p && p < e))
            .collect();
        if positions.is_empty() {
            return None;
        }
        let at = positions[rng.random_range(0..positions.len())];
        let mut out = tokens.to_vec();
        out.insert(at, word);
        Some(out)
    }

    fn eda_synonym(
        &self,
        tokens: &[String],
        mutable: &[usize],
        rng: &mut ChaCha20Rng,
    ) -> Option<Vec<String>> {
        let sources: Vec<usize> = mutable
            .iter()
            .copied()
            .filter(|&i| !self.thesaurus.alternatives(&tokens[i]).is_empty())
            .collect();
        if sources.is_empty() {
            return None;
        }
        let at = sources[rng.random_range(0..sources.len())];
        let alts = self.thesaurus.alternatives(&tokens[at]);
        let mut out = tokens.to_vec();
        out[at] = alts[rng.random_range(0..alts.len())].clone();
        Some(out)
    }

    /// Per-token synonym substitution with protected constraint tokens.
    ///
    /// Each substitutable token flips with a fixed probability; when the coin
    /// flips land on no substitution at all, one is forced so a substitutable
    /// utterance always changes.
    pub fn synonym_replace(
        &self,
        utterance: &[String],
        constraints: &ConstraintSet,
        seed: u64,
    ) -> Vec<String> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let frozen = frozen_mask(utterance, constraints);
        let mut out = utterance.to_vec();
        let mut substitutable = Vec::new();
        let mut changed = false;
        for i in 0..out.len() {
            if frozen[i] {
                continue;
            }
            let alts = self.thesaurus.alternatives(&out[i]);
            if alts.is_empty() {
                continue;
            }
            substitutable.push(i);
            if rng.random_bool(SYN_PROB) {
                out[i] = alts[rng.random_range(0..alts.len())].clone();
                changed = true;
            }
        }
        if !changed && !substitutable.is_empty() {
            let i = substitutable[rng.random_range(0..substitutable.len())];
            let alts = self.thesaurus.alternatives(&utterance[i]);
            out[i] = alts[rng.random_range(0..alts.len())].clone();
        }
        if constraint_check(&out, constraints) {
            out
        } else {
            utterance.to_vec()
        }
    }
}

fn unit_float(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}
