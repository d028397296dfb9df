//! Simulated database: entity tables per domain, belief-state queries, and
//! match-count bucket encoding.
//!
//! Matching is exact string equality and row order comes from the source file,
//! so identical `(kb, belief)` inputs always yield the identical result
//! including the selected row.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BeliefState, OntologySchema};

/// One entity: attribute name → value, all lowercase strings.
pub type EntityRow = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("failed to read kb file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse kb file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("kb domain `{domain}` row {row} attribute `{attribute}` is not in the schema")]
    UnknownAttribute {
        domain: String,
        row: usize,
        attribute: String,
    },
    #[error("kb domain `{domain}` is not in the schema")]
    UnknownDomain { domain: String },
}

/// Entity tables per domain. Row order within a table is the stable order
/// used to pick `selected`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeBase {
    tables: BTreeMap<String, Vec<EntityRow>>,
}

impl KnowledgeBase {
    pub fn new(tables: BTreeMap<String, Vec<EntityRow>>) -> Self {
        Self { tables }
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| KbError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        let text = serde_json::to_string_pretty(self).expect("kb serialization cannot fail");
        std::fs::write(path, text).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Checks that every attribute name is declared in the schema
    /// (as a slot or a requestable of its domain).
    pub fn validate(&self, schema: &OntologySchema) -> Result<(), KbError> {
        for (domain, rows) in &self.tables {
            let Some(domain_schema) = schema.domain(domain) else {
                return Err(KbError::UnknownDomain {
                    domain: domain.clone(),
                });
            };
            for (i, row) in rows.iter().enumerate() {
                for attribute in row.keys() {
                    if !domain_schema.slots.contains(attribute)
                        && !domain_schema.requestables.contains(attribute)
                    {
                        return Err(KbError::UnknownAttribute {
                            domain: domain.clone(),
                            row: i,
                            attribute: attribute.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self, domain: &str) -> &[EntityRow] {
        self.tables.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

/// Match-count bucket. Saturates at three matches; `DbNone` means no domain
/// had any constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbBucket {
    Db0,
    Db1,
    Db2,
    Db3Plus,
    DbNone,
}

impl DbBucket {
    pub fn from_match_count(count: usize) -> Self {
        match count {
            0 => DbBucket::Db0,
            1 => DbBucket::Db1,
            2 => DbBucket::Db2,
            _ => DbBucket::Db3Plus,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            DbBucket::Db0 => "[db_0]",
            DbBucket::Db1 => "[db_1]",
            DbBucket::Db2 => "[db_2]",
            DbBucket::Db3Plus => "[db_3plus]",
            DbBucket::DbNone => "[db_none]",
        }
    }

    /// Inverse of [`DbBucket::token`]; unknown tokens map to `None`.
    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "[db_0]" => DbBucket::Db0,
            "[db_1]" => DbBucket::Db1,
            "[db_2]" => DbBucket::Db2,
            "[db_3plus]" => DbBucket::Db3Plus,
            "[db_none]" => DbBucket::DbNone,
            _ => return None,
        })
    }
}

impl fmt::Display for DbBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Result of querying the database with a belief state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbResult {
    pub domain: Option<String>,
    pub match_count: usize,
    pub selected: Option<EntityRow>,
    pub bucket: DbBucket,
}

impl DbResult {
    /// The no-active-domain result.
    pub fn none() -> Self {
        Self {
            domain: None,
            match_count: 0,
            selected: None,
            bucket: DbBucket::DbNone,
        }
    }
}

impl Default for DbResult {
    fn default() -> Self {
        Self::none()
    }
}

/// Queries the database with a belief state.
///
/// The active domain is the last domain in canonical (alphabetical) order
/// holding at least one constraint. A row matches iff every constrained slot
/// equals the row attribute exactly; `selected` is the first matching row in
/// stable order.
pub fn query(kb: &KnowledgeBase, belief: &BeliefState) -> DbResult {
    let Some(domain) = belief.domains().last() else {
        return DbResult::none();
    };
    let constraints = belief.slots(domain).expect("domain came from the belief");
    let matching: Vec<&EntityRow> = kb
        .rows(domain)
        .iter()
        .filter(|row| {
            constraints
                .iter()
                .all(|(slot, value)| row.get(slot).is_some_and(|v| v == value))
        })
        .collect();
    DbResult {
        domain: Some(domain.to_string()),
        match_count: matching.len(),
        selected: matching.first().map(|row| (*row).clone()),
        bucket: DbBucket::from_match_count(matching.len()),
    }
}

/// Encodes a query result as the token pair `<db> [<bucket>]`.
pub fn encode_db(result: &DbResult) -> Vec<String> {
    vec!["<db>".to_string(), result.bucket.token().to_string()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;

    fn row(pairs: &[(&str, &str)]) -> EntityRow {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn fixture_kb() -> KnowledgeBase {
        let mut tables = BTreeMap::new();
        tables.insert(
            "restaurant".to_string(),
            vec![
                row(&[("name", "golden dragon"), ("food", "chinese"), ("area", "centre")]),
                row(&[("name", "silver palace"), ("food", "chinese"), ("area", "centre")]),
                row(&[("name", "royal garden"), ("food", "chinese"), ("area", "centre")]),
                row(&[("name", "blue fork"), ("food", "italian"), ("area", "north")]),
            ],
        );
        KnowledgeBase::new(tables)
    }

    #[test]
    fn empty_belief_gives_db_none() {
        let result = query(&fixture_kb(), &BeliefState::new());
        assert_eq!(result, DbResult::none());
    }

    #[test]
    fn no_matching_row_gives_db_0() {
        let mut belief = BeliefState::new();
        belief.insert("restaurant", "food", "north indian").unwrap();
        belief.insert("restaurant", "area", "centre").unwrap();
        let result = query(&fixture_kb(), &belief);
        assert_eq!(result.match_count, 0);
        assert_eq!(result.bucket, DbBucket::Db0);
        assert!(result.selected.is_none());
    }

    #[test]
    fn three_matching_rows_saturate_the_bucket() {
        let mut belief = BeliefState::new();
        belief.insert("restaurant", "food", "chinese").unwrap();
        belief.insert("restaurant", "area", "centre").unwrap();
        let result = query(&fixture_kb(), &belief);
        assert_eq!(result.match_count, 3);
        assert_eq!(result.bucket, DbBucket::Db3Plus);
        assert_eq!(
            result.selected.unwrap().get("name").map(String::as_str),
            Some("golden dragon"),
            "selected must be the first matching row in stable order"
        );
    }

    #[test]
    fn active_domain_is_last_constrained_in_canonical_order() {
        let mut belief = BeliefState::new();
        belief.insert("attraction", "area", "centre").unwrap();
        belief.insert("restaurant", "food", "italian").unwrap();
        let result = query(&fixture_kb(), &belief);
        assert_eq!(result.domain.as_deref(), Some("restaurant"));
        assert_eq!(result.match_count, 1);
    }

    #[test]
    fn unknown_domain_matches_nothing() {
        let mut belief = BeliefState::new();
        belief.insert("zoo", "animal", "lion").unwrap();
        let result = query(&fixture_kb(), &belief);
        assert_eq!(result.domain.as_deref(), Some("zoo"));
        assert_eq!(result.bucket, DbBucket::Db0);
    }

    #[test]
    fn bucket_is_total_over_match_counts() {
        assert_eq!(DbBucket::from_match_count(0), DbBucket::Db0);
        assert_eq!(DbBucket::from_match_count(1), DbBucket::Db1);
        assert_eq!(DbBucket::from_match_count(2), DbBucket::Db2);
        assert_eq!(DbBucket::from_match_count(3), DbBucket::Db3Plus);
        assert_eq!(DbBucket::from_match_count(17), DbBucket::Db3Plus);
    }

    #[test]
    fn encode_db_tokens() {
        assert_eq!(encode_db(&DbResult::none()), toks("<db> [db_none]"));
        let mut belief = BeliefState::new();
        belief.insert("restaurant", "food", "italian").unwrap();
        assert_eq!(encode_db(&query(&fixture_kb(), &belief)), toks("<db> [db_1]"));
    }

    #[test]
    fn adding_constraint_to_active_domain_never_increases_matches() {
        let kb = fixture_kb();
        let mut belief = BeliefState::new();
        belief.insert("restaurant", "area", "centre").unwrap();
        let before = query(&kb, &belief).match_count;
        belief.insert("restaurant", "food", "chinese").unwrap();
        let after = query(&kb, &belief).match_count;
        assert!(after <= before);
    }
}
