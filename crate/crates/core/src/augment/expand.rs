//! Turn expansion: the original (utterance, response) pair plus up to `m`
//! paired rewrites sharing the paraphrase index.
//!
//! Only the current turn's utterance and response are ever rewritten; the
//! dialogue history is left untouched (rewriting it recursively would blow up
//! combinatorially). History preservation is enforced upstream by
//! `Context::with_current_utterance`.

use serde::{Deserialize, Serialize};

use super::constraint::{constraint_check, ConstraintSet};
use super::rewrite::Paraphraser;
use super::AugmentStrategy;
use crate::corpus::Turn;
use crate::dualdata::DialogueState;
use crate::seed::derive_seed;

/// Retry budget per paraphrase index for the single-candidate strategies.
const EDA_RETRIES: usize = 8;

/// Audit record: one original with its ordered rewrites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseSet {
    pub original: Vec<String>,
    pub variants: Vec<Vec<String>>,
    pub strategy: AugmentStrategy,
}

impl ParaphraseSet {
    /// Builds a set, enforcing that variants satisfy the generating
    /// constraints and are pairwise distinct and distinct from the original.
    pub fn new(
        original: Vec<String>,
        variants: Vec<Vec<String>>,
        strategy: AugmentStrategy,
        constraints: &ConstraintSet,
    ) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        let variants = variants
            .into_iter()
            .filter(|v| v != &original)
            .filter(|v| constraint_check(v, constraints))
            .filter(|v| seen.insert(v.clone()))
            .collect();
        Self {
            original,
            variants,
            strategy,
        }
    }
}

/// One (utterance, response) pair at a paraphrase index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedPair {
    pub utterance: Vec<String>,
    pub response: Vec<String>,
}

/// Result of [`expand_turn`]: between 1 and m+1 pairs, index 0 the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedTurn {
    pub pairs: Vec<ExpandedPair>,
    /// How many requested rewrites could not be produced.
    pub shortfall: usize,
    pub utterance_set: ParaphraseSet,
    pub response_set: ParaphraseSet,
}

/// Expands a turn into the original pair plus up to `m` paired rewrites.
///
/// Utterance constraints are the belief values occurring in the utterance;
/// response constraints are the belief values occurring in the response plus
/// every placeholder it contains. Rewrites at index j pair the j-th utterance
/// variant with the j-th response variant; if either side runs short the list
/// stops there and the shortfall is reported.
pub fn expand_turn(
    turn: &Turn,
    state: &DialogueState,
    m: usize,
    strategy: AugmentStrategy,
    seed: u64,
) -> ExpandedTurn {
    expand_turn_with(&Paraphraser::default(), turn, state, m, strategy, seed)
}

/// [`expand_turn`] with an explicit rewriter (custom thesaurus or fluency
/// table).
pub fn expand_turn_with(
    rewriter: &Paraphraser,
    turn: &Turn,
    state: &DialogueState,
    m: usize,
    strategy: AugmentStrategy,
    seed: u64,
) -> ExpandedTurn {
    let utterance = &turn.user_utterance;
    let response = &turn.system_response_delex;

    let utterance_constraints =
        ConstraintSet::from_belief(&state.belief).occurring_in(utterance);
    let mut response_constraints =
        ConstraintSet::from_belief(&state.belief).occurring_in(response);
    for token in response {
        if token.starts_with("[value_") {
            response_constraints.insert(token.clone());
        }
    }

    let utterance_variants = variants_for(
        rewriter,
        utterance,
        &utterance_constraints,
        m,
        strategy,
        derive_seed(seed, &["utterance"]),
    );
    let response_variants = variants_for(
        rewriter,
        response,
        &response_constraints,
        m,
        strategy,
        derive_seed(seed, &["response"]),
    );

    let produced = utterance_variants.len().min(response_variants.len()).min(m);
    let mut pairs = vec![ExpandedPair {
        utterance: utterance.clone(),
        response: response.clone(),
    }];
    for j in 0..produced {
        pairs.push(ExpandedPair {
            utterance: utterance_variants[j].clone(),
            response: response_variants[j].clone(),
        });
    }

    ExpandedTurn {
        shortfall: m - produced,
        utterance_set: ParaphraseSet::new(
            utterance.clone(),
            utterance_variants,
            strategy,
            &utterance_constraints,
        ),
        response_set: ParaphraseSet::new(
            response.clone(),
            response_variants,
            strategy,
            &response_constraints,
        ),
        pairs,
    }
}

fn variants_for(
    rewriter: &Paraphraser,
    tokens: &[String],
    constraints: &ConstraintSet,
    m: usize,
    strategy: AugmentStrategy,
    seed: u64,
) -> Vec<Vec<String>> {
    if m == 0 {
        return Vec::new();
    }
    match strategy {
        AugmentStrategy::Para => rewriter.paraphrase(tokens, constraints, m, seed),
        AugmentStrategy::Eda | AugmentStrategy::Syn => {
            let mut out: Vec<Vec<String>> = Vec::new();
            for j in 0..m {
                let mut found = None;
                for attempt in 0..EDA_RETRIES {
                    let attempt_seed =
                        derive_seed(seed, &[&j.to_string(), &attempt.to_string()]);
                    let candidate = match strategy {
                        AugmentStrategy::Eda => rewriter.eda(tokens, constraints, attempt_seed),
                        _ => rewriter.synonym_replace(tokens, constraints, attempt_seed),
                    };
                    if candidate != tokens && !out.contains(&candidate) {
                        found = Some(candidate);
                        break;
                    }
                }
                match found {
                    Some(candidate) => out.push(candidate),
                    None => break,
                }
            }
            out
        }
    }
}
