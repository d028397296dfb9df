//! Constraint sets: the dialogue-state values a rewrite must preserve.

use std::collections::BTreeSet;

use crate::corpus::BeliefState;
use crate::dualdata::DialogueState;

/// Values that must survive a rewrite verbatim.
///
/// Each value is a lowercase, possibly multi-token string; a candidate
/// satisfies the set when every value appears as a contiguous token
/// subsequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    values: BTreeSet<String>,
}

impl ConstraintSet {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let values = values
            .into_iter()
            .map(|v| v.into().trim().to_lowercase())
            .filter(|v| !v.is_empty())
            .collect();
        Self { values }
    }

    /// All belief values.
    pub fn from_belief(belief: &BeliefState) -> Self {
        Self::new(belief.values().iter().map(|v| v.to_string()))
    }

    /// All belief values plus the selected entity's attribute values.
    pub fn from_state(state: &DialogueState) -> Self {
        let mut values: Vec<String> = state.belief.values().iter().map(|v| v.to_string()).collect();
        if let Some(row) = &state.db.selected {
            values.extend(row.values().cloned());
        }
        Self::new(values)
    }

    /// Restricts the set to values occurring in `tokens`; a value absent from
    /// the text being rewritten cannot be preserved by any rewrite.
    pub fn occurring_in(&self, tokens: &[String]) -> Self {
        Self {
            values: self
                .values
                .iter()
                .filter(|v| contains_contiguous(tokens, v))
                .cloned()
                .collect(),
        }
    }

    pub fn insert(&mut self, value: impl Into<String>) {
        let value = value.into().trim().to_lowercase();
        if !value.is_empty() {
            self.values.insert(value);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(String::as_str)
    }

    /// Token sequences of every value, longest first (ties alphabetical).
    pub fn token_seqs(&self) -> Vec<Vec<&str>> {
        let mut seqs: Vec<Vec<&str>> = self
            .values
            .iter()
            .map(|v| v.split_whitespace().collect())
            .collect();
        seqs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        seqs
    }
}

/// True iff every constraint value appears as a contiguous token subsequence
/// of `candidate`. The empty set is satisfied by anything.
pub fn constraint_check(candidate: &[String], constraints: &ConstraintSet) -> bool {
    constraints
        .values
        .iter()
        .all(|value| contains_contiguous(candidate, value))
}

fn contains_contiguous(tokens: &[String], value: &str) -> bool {
    let needle: Vec<&str> = value.split_whitespace().collect();
    if needle.is_empty() {
        return true;
    }
    if needle.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(needle.len())
        .any(|window| window.iter().zip(&needle).all(|(t, n)| t == n))
}

/// Marks token positions covered by a constraint value occurrence.
///
/// Used to protect those spans during rewriting; also freezes structural
/// tokens (`[...]`, `<...>`).
pub fn frozen_mask(tokens: &[String], constraints: &ConstraintSet) -> Vec<bool> {
    let mut frozen = vec![false; tokens.len()];
    for (i, token) in tokens.iter().enumerate() {
        if token.starts_with('[') || token.starts_with('<') {
            frozen[i] = true;
        }
    }
    for seq in constraints.token_seqs() {
        if seq.is_empty() || seq.len() > tokens.len() {
            continue;
        }
        for start in 0..=tokens.len() - seq.len() {
            if seq
                .iter()
                .zip(&tokens[start..])
                .all(|(n, t)| *n == t.as_str())
            {
                for flag in &mut frozen[start..start + seq.len()] {
                    *flag = true;
                }
            }
        }
    }
    frozen
}

/// Spans (start, end-exclusive) of constraint occurrences, for operations
/// that must not break a span apart (insertions).
pub fn constraint_spans(tokens: &[String], constraints: &ConstraintSet) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for seq in constraints.token_seqs() {
        if seq.is_empty() || seq.len() > tokens.len() {
            continue;
        }
        for start in 0..=tokens.len() - seq.len() {
            if seq
                .iter()
                .zip(&tokens[start..])
                .all(|(n, t)| *n == t.as_str())
            {
                spans.push((start, start + seq.len()));
            }
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;

    #[test]
    fn empty_set_accepts_anything() {
        let set = ConstraintSet::default();
        assert!(constraint_check(&toks("whatever tokens"), &set));
        assert!(constraint_check(&[], &set));
    }

    #[test]
    fn table8_weather_example() {
        let set = ConstraintSet::new(["hail", "los angeles"]);
        assert!(constraint_check(
            &toks("will hail hit los angeles this weekend ?"),
            &set
        ));
        assert!(!constraint_check(
            &toks("will hit los angeles this weekend ?"),
            &set
        ));
    }

    #[test]
    fn multi_token_values_must_stay_contiguous() {
        let set = ConstraintSet::new(["los angeles"]);
        assert!(!constraint_check(&toks("los big angeles"), &set));
    }

    #[test]
    fn occurring_in_filters_absent_values() {
        let set = ConstraintSet::new(["chinese", "centre"]);
        let filtered = set.occurring_in(&toks("great , tell me the address of the chinese place"));
        assert_eq!(filtered.iter().collect::<Vec<_>>(), vec!["chinese"]);
    }

    #[test]
    fn frozen_mask_covers_spans_and_structural_tokens() {
        let set = ConstraintSet::new(["los angeles"]);
        let tokens = toks("will [value_weather] hit los angeles today");
        let mask = frozen_mask(&tokens, &set);
        assert_eq!(mask, vec![false, true, false, true, true, false]);
    }

    #[test]
    fn from_state_includes_entity_attributes() {
        use crate::kb::{DbBucket, DbResult};
        let mut belief = BeliefState::new();
        belief.insert("restaurant", "food", "thai").unwrap();
        let row: crate::kb::EntityRow = [("name".to_string(), "golden dragon".to_string())]
            .into_iter()
            .collect();
        let state = DialogueState {
            belief,
            db: DbResult {
                domain: Some("restaurant".into()),
                match_count: 1,
                selected: Some(row),
                bucket: DbBucket::Db1,
            },
        };
        let set = ConstraintSet::from_state(&state);
        let values: Vec<&str> = set.iter().collect();
        assert_eq!(values, vec!["golden dragon", "thai"]);
    }
}
