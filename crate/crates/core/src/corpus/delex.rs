//! Delexicalization: replacing entity values with `[value_<slot>]`
//! placeholders so generation is entity-agnostic.

use super::belief::BeliefState;
use crate::kb::EntityRow;

/// Replaces every maximal token span equal to a belief value or an entity
/// attribute value with `[value_<slot>]`.
///
/// Longer values replace before shorter ones; among equal-length candidates
/// the alphabetically first slot wins. Scanning is left to right, so the
/// operation is deterministic and idempotent (placeholders never match
/// values).
pub fn delexicalize(
    response_lex: &[String],
    belief: &BeliefState,
    entity: Option<&EntityRow>,
) -> Vec<String> {
    let mut candidates: Vec<(Vec<&str>, &str)> = Vec::new();
    for (_, slots) in belief.iter() {
        for (slot, value) in slots {
            candidates.push((value.split_whitespace().collect(), slot));
        }
    }
    if let Some(row) = entity {
        for (attribute, value) in row {
            candidates.push((value.split_whitespace().collect(), attribute));
        }
    }
    candidates.retain(|(tokens, _)| !tokens.is_empty());
    candidates.sort_by(|a, b| {
        b.0.len()
            .cmp(&a.0.len())
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.0.cmp(&b.0))
    });
    candidates.dedup();

    let mut out = Vec::with_capacity(response_lex.len());
    let mut i = 0;
    while i < response_lex.len() {
        let matched = candidates.iter().find(|(value_tokens, _)| {
            i + value_tokens.len() <= response_lex.len()
                && value_tokens
                    .iter()
                    .zip(&response_lex[i..])
                    .all(|(v, t)| *v == t.as_str())
        });
        match matched {
            Some((value_tokens, slot)) => {
                out.push(format!("[value_{slot}]"));
                i += value_tokens.len();
            }
            None => {
                out.push(response_lex[i].clone());
                i += 1;
            }
        }
    }
    out
}
