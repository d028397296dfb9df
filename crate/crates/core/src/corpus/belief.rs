//! Belief states and their canonical token serialization.
//!
//! The canonical form sorts domains alphabetically, then slots alphabetically,
//! so exact-match comparisons (joint goal accuracy) are well-defined. The
//! parser is lenient by contract: it must accept arbitrary decoder output,
//! dropping malformed fragments instead of failing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Structured domain → slot → value map of user constraints.
///
/// Domains and slots iterate in alphabetical order; values are lowercase and
/// non-empty. Domain maps are never empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState {
    entries: BTreeMap<String, BTreeMap<String, String>>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from a raw map, rejecting empty or malformed entries.
    pub fn from_map(
        map: BTreeMap<String, BTreeMap<String, String>>,
    ) -> Result<Self, CorpusError> {
        let mut state = Self::new();
        for (domain, slots) in map {
            if slots.is_empty() {
                return Err(CorpusError::invalid_belief(format!(
                    "domain `{domain}` has no slots"
                )));
            }
            for (slot, value) in slots {
                state.insert(&domain, &slot, &value)?;
            }
        }
        Ok(state)
    }

    /// Inserts one constraint, lowercasing domain, slot, and value.
    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) -> Result<(), CorpusError> {
        let domain = domain.trim().to_lowercase();
        let slot = slot.trim().to_lowercase();
        let value = normalize_value(value);
        if domain.is_empty() || slot.is_empty() {
            return Err(CorpusError::invalid_belief("empty domain or slot name"));
        }
        if value.is_empty() {
            return Err(CorpusError::invalid_belief(format!(
                "empty value for {domain}.{slot}"
            )));
        }
        for field in [&domain, &slot, &value] {
            if field.chars().any(|c| "[]<>,".contains(c)) {
                return Err(CorpusError::invalid_belief(format!(
                    "`{field}` contains a reserved delimiter character"
                )));
            }
        }
        if slot.contains(':') || domain.contains(':') {
            return Err(CorpusError::invalid_belief(format!(
                "`{domain}.{slot}` contains a colon"
            )));
        }
        self.entries.entry(domain).or_default().insert(slot, value);
        Ok(())
    }

    /// Lenient insert for model output: malformed entries are dropped.
    fn insert_lenient(&mut self, domain: &str, slot: &str, value: &str) {
        let _ = self.insert(domain, slot, value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of (domain, slot) constraints.
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn slots(&self, domain: &str) -> Option<&BTreeMap<String, String>> {
        self.entries.get(domain)
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.entries.get(domain)?.get(slot).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, String>)> {
        self.entries.iter().map(|(d, s)| (d.as_str(), s))
    }

    /// All constraint values across domains, canonically ordered.
    pub fn values(&self) -> Vec<&str> {
        self.entries
            .values()
            .flat_map(|slots| slots.values().map(String::as_str))
            .collect()
    }

    pub fn as_map(&self) -> &BTreeMap<String, BTreeMap<String, String>> {
        &self.entries
    }
}

fn normalize_value(value: &str) -> String {
    value.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Token emitted for the empty belief state.
pub const NONE_TOKEN: &str = "[none]";

/// Renders a belief state as canonical tokens:
/// `[<domain>] <slot> : <value> , <slot> : <value> [<domain>] …`.
///
/// The empty state renders as the single token `[none]`.
pub fn serialize_belief(belief: &BeliefState) -> Vec<String> {
    if belief.is_empty() {
        return vec![NONE_TOKEN.to_string()];
    }
    let mut out = Vec::new();
    for (domain, slots) in belief.iter() {
        out.push(format!("[{domain}]"));
        for (i, (slot, value)) in slots.iter().enumerate() {
            if i > 0 {
                out.push(",".to_string());
            }
            out.extend(slot.split_whitespace().map(String::from));
            out.push(":".to_string());
            out.extend(value.split_whitespace().map(String::from));
        }
    }
    out
}

/// Best-effort parse of a belief token stream back into a canonical state.
///
/// Never fails: fragments without a current domain, without a colon, or with
/// an empty slot or value are dropped.
pub fn parse_belief(tokens: &[String]) -> BeliefState {
    let mut state = BeliefState::new();
    let mut domain: Option<String> = None;
    let mut buf: Vec<&str> = Vec::new();

    let flush = |domain: &Option<String>, buf: &mut Vec<&str>, state: &mut BeliefState| {
        if let (Some(domain), Some(colon)) = (domain, buf.iter().position(|t| *t == ":")) {
            let slot = buf[..colon].join(" ");
            let value = buf[colon + 1..].join(" ");
            if !slot.is_empty() && !value.is_empty() {
                state.insert_lenient(domain, &slot, &value);
            }
        }
        buf.clear();
    };

    for token in tokens {
        if token == NONE_TOKEN {
            flush(&domain, &mut buf, &mut state);
            continue;
        }
        if let Some(name) = domain_token(token) {
            flush(&domain, &mut buf, &mut state);
            domain = Some(name.to_string());
        } else if token == "," {
            flush(&domain, &mut buf, &mut state);
        } else {
            buf.push(token);
        }
    }
    flush(&domain, &mut buf, &mut state);
    state
}

/// Returns the domain name if `token` has the form `[name]`.
fn domain_token(token: &str) -> Option<&str> {
    let inner = token.strip_prefix('[')?.strip_suffix(']')?;
    if inner.is_empty() || inner.contains('[') || inner.contains(']') {
        return None;
    }
    Some(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;

    fn fixture_state() -> BeliefState {
        let mut b = BeliefState::new();
        b.insert("restaurant", "food", "north indian").unwrap();
        b.insert("restaurant", "area", "centre").unwrap();
        b
    }

    #[test]
    fn empty_state_serializes_to_none() {
        assert_eq!(serialize_belief(&BeliefState::new()), toks("[none]"));
    }

    #[test]
    fn canonical_order_is_alphabetical() {
        // Alphabetical normalization of the two-slot restaurant state.
        assert_eq!(
            serialize_belief(&fixture_state()),
            toks("[restaurant] area : centre , food : north indian")
        );
    }

    #[test]
    fn multi_domain_serialization() {
        let mut b = fixture_state();
        b.insert("hotel", "area", "north").unwrap();
        assert_eq!(
            serialize_belief(&b),
            toks("[hotel] area : north [restaurant] area : centre , food : north indian")
        );
    }

    #[test]
    fn parse_none_is_empty() {
        assert!(parse_belief(&toks("[none]")).is_empty());
    }

    #[test]
    fn parse_two_slot_state() {
        let parsed = parse_belief(&toks("[restaurant] area : centre , food : chinese"));
        assert_eq!(parsed.get("restaurant", "area"), Some("centre"));
        assert_eq!(parsed.get("restaurant", "food"), Some("chinese"));
        assert_eq!(parsed.len(), 2);
    }

    #[test]
    fn garbage_parses_to_empty() {
        assert!(parse_belief(&toks("foo bar :")).is_empty());
        assert!(parse_belief(&[]).is_empty());
        assert!(parse_belief(&toks(": : , ,")).is_empty());
    }

    #[test]
    fn partial_garbage_keeps_good_fragments() {
        let parsed = parse_belief(&toks("junk : junk [restaurant] food : thai , broken"));
        assert_eq!(parsed.get("restaurant", "food"), Some("thai"));
        assert_eq!(parsed.len(), 1);
    }

    #[test]
    fn round_trip_fixture() {
        let b = fixture_state();
        assert_eq!(parse_belief(&serialize_belief(&b)), b);
    }

    #[test]
    fn time_values_survive_round_trip() {
        let mut b = BeliefState::new();
        b.insert("restaurant", "time", "12:30").unwrap();
        assert_eq!(parse_belief(&serialize_belief(&b)), b);
    }

    #[test]
    fn insert_rejects_empty_value() {
        let mut b = BeliefState::new();
        assert!(b.insert("restaurant", "food", "  ").is_err());
    }

    #[test]
    fn insert_rejects_delimiter_characters() {
        let mut b = BeliefState::new();
        assert!(b.insert("restaurant", "food", "a,b").is_err());
        assert!(b.insert("restaurant", "fo:od", "x").is_err());
        assert!(b.insert("rest[aurant", "food", "x").is_err());
    }

    #[test]
    fn insert_lowercases() {
        let mut b = BeliefState::new();
        b.insert("Restaurant", "Food", "North  Indian").unwrap();
        assert_eq!(b.get("restaurant", "food"), Some("north indian"));
    }
}
