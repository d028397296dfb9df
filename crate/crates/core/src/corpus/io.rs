//! Corpus ingestion and persistence (JSONL, one dialogue per line).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    tokenize::{detokenize, tokenize},
    BeliefState, CorpusError, Dialogue, DialogueCorpus, DomainGoal, Goal, OntologySchema, Turn,
};
use crate::kb::DbResult;

#[derive(Debug, Serialize, Deserialize)]
struct DialogueRecord {
    dialogue_id: String,
    domains: Vec<String>,
    #[serde(default)]
    goal: BTreeMap<String, GoalRecord>,
    turns: Vec<TurnRecord>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct GoalRecord {
    #[serde(default)]
    inform: BTreeMap<String, String>,
    #[serde(default)]
    request: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TurnRecord {
    user: String,
    response_delex: String,
    response_lex: String,
    #[serde(default)]
    belief: BTreeMap<String, BTreeMap<String, String>>,
}

/// Loads and validates a JSONL corpus against an ontology schema.
///
/// Belief values may reference strings absent from any knowledge base, but
/// unknown domains, unknown slot names, and malformed placeholders are
/// schema violations reported with the dialogue id and field path.
pub fn load_corpus(path: &Path, schema: OntologySchema) -> Result<DialogueCorpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut dialogues = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord =
            serde_json::from_str(line).map_err(|source| CorpusError::Parse {
                line: i + 1,
                source,
            })?;
        let dialogue = validate_record(record, &schema)?;
        if !seen_ids.insert(dialogue.dialogue_id.clone()) {
            return Err(CorpusError::schema(
                dialogue.dialogue_id.clone(),
                "dialogue_id",
                "duplicate dialogue id",
            ));
        }
        dialogues.push(dialogue);
    }
    Ok(DialogueCorpus { dialogues, schema })
}

/// Writes a corpus as JSONL, one dialogue per line.
pub fn save_corpus(corpus: &DialogueCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut lines = String::new();
    for dialogue in &corpus.dialogues {
        let record = DialogueRecord {
            dialogue_id: dialogue.dialogue_id.clone(),
            domains: dialogue.domain_tags.iter().cloned().collect(),
            goal: dialogue
                .goal
                .domains
                .iter()
                .map(|(domain, g)| {
                    (
                        domain.clone(),
                        GoalRecord {
                            inform: g.inform.clone(),
                            request: g.request.iter().cloned().collect(),
                        },
                    )
                })
                .collect(),
            turns: dialogue
                .turns
                .iter()
                .map(|turn| TurnRecord {
                    user: detokenize(&turn.user_utterance),
                    response_delex: detokenize(&turn.system_response_delex),
                    response_lex: detokenize(&turn.system_response_lex),
                    belief: turn.belief.as_map().clone(),
                })
                .collect(),
        };
        lines.push_str(&serde_json::to_string(&record).expect("corpus serialization cannot fail"));
        lines.push('\n');
    }
    std::fs::write(path, lines).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn validate_record(
    record: DialogueRecord,
    schema: &OntologySchema,
) -> Result<Dialogue, CorpusError> {
    let id = record.dialogue_id.clone();
    if record.turns.is_empty() {
        return Err(CorpusError::schema(&id, "turns", "dialogue has no turns"));
    }

    let mut goal = Goal::default();
    for (domain, g) in record.goal {
        let Some(domain_schema) = schema.domain(&domain) else {
            return Err(CorpusError::schema(
                &id,
                format!("goal.{domain}"),
                "unknown domain",
            ));
        };
        for slot in g.inform.keys() {
            if !domain_schema.slots.contains(slot) {
                return Err(CorpusError::schema(
                    &id,
                    format!("goal.{domain}.inform.{slot}"),
                    "unknown slot name",
                ));
            }
        }
        for slot in &g.request {
            if !domain_schema.requestables.contains(slot) {
                return Err(CorpusError::schema(
                    &id,
                    format!("goal.{domain}.request.{slot}"),
                    "unknown requestable slot",
                ));
            }
        }
        goal.domains.insert(
            domain,
            DomainGoal {
                inform: g
                    .inform
                    .into_iter()
                    .map(|(k, v)| (k, v.to_lowercase()))
                    .collect(),
                request: g.request.into_iter().collect(),
            },
        );
    }

    let mut turns = Vec::with_capacity(record.turns.len());
    let mut observed_domains: BTreeSet<String> = goal.domains.keys().cloned().collect();
    for (t, turn) in record.turns.into_iter().enumerate() {
        let belief = BeliefState::from_map(turn.belief).map_err(|e| {
            CorpusError::schema(&id, format!("turns[{t}].belief"), e.to_string())
        })?;
        for (domain, slots) in belief.iter() {
            let Some(domain_schema) = schema.domain(domain) else {
                return Err(CorpusError::schema(
                    &id,
                    format!("turns[{t}].belief.{domain}"),
                    "unknown domain",
                ));
            };
            for slot in slots.keys() {
                if !domain_schema.slots.contains(slot) {
                    return Err(CorpusError::schema(
                        &id,
                        format!("turns[{t}].belief.{domain}.{slot}"),
                        "unknown slot name",
                    ));
                }
            }
            observed_domains.insert(domain.to_string());
        }
        let response_delex = tokenize(&turn.response_delex);
        for token in &response_delex {
            if let Some(slot) = placeholder_slot(token) {
                if !schema.placeholder_slot_exists(slot) {
                    return Err(CorpusError::schema(
                        &id,
                        format!("turns[{t}].response_delex"),
                        format!("placeholder `{token}` names an unknown slot"),
                    ));
                }
            }
        }
        turns.push(Turn {
            turn_index: t,
            user_utterance: tokenize(&turn.user),
            system_response_delex: response_delex,
            system_response_lex: tokenize(&turn.response_lex),
            belief,
            db: DbResult::none(),
        });
    }

    let declared: BTreeSet<String> = record.domains.into_iter().collect();
    if declared != observed_domains {
        return Err(CorpusError::schema(
            &id,
            "domains",
            format!(
                "declared domains {declared:?} do not equal the domains observed in beliefs and goal {observed_domains:?}"
            ),
        ));
    }

    Ok(Dialogue {
        dialogue_id: id,
        domain_tags: declared,
        turns,
        goal,
    })
}

/// Extracts `<slot>` from a `[value_<slot>]` token.
pub fn placeholder_slot(token: &str) -> Option<&str> {
    token.strip_prefix("[value_")?.strip_suffix(']')
}
