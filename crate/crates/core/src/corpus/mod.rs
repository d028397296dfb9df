//! Dialogue data model: corpora, belief states, contexts, delexicalization,
//! the synthetic generator, and low-resource subsampling.
//!
//! Corpus objects are immutable after construction and safe to share across
//! workers; every operation here is a pure function of its inputs.

mod belief;
mod delex;
mod io;
mod subsample;
mod synth;
pub mod tokenize;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use belief::{parse_belief, serialize_belief, BeliefState, NONE_TOKEN};
pub use delex::delexicalize;
pub use io::{load_corpus, save_corpus};
pub use subsample::subsample;
pub use synth::{generate_kb, generate_synthetic, DomainSpec, GeneratorConfig};
pub use tokenize::{detokenize, tokenize};

use crate::kb::DbResult;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema violation in dialogue `{dialogue_id}` at {path}: {message}")]
    Schema {
        dialogue_id: String,
        path: String,
        message: String,
    },
    #[error("invalid belief state: {0}")]
    InvalidBelief(String),
    #[error("turn index {index} out of range for dialogue with {len} turns")]
    TurnOutOfRange { index: usize, len: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("subsample fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),
}

impl CorpusError {
    pub(crate) fn invalid_belief(message: impl Into<String>) -> Self {
        CorpusError::InvalidBelief(message.into())
    }

    pub(crate) fn schema(
        dialogue_id: impl Into<String>,
        path: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        CorpusError::Schema {
            dialogue_id: dialogue_id.into(),
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Who produced a context segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Usr,
    Sys,
}

impl Speaker {
    pub fn tag(self) -> &'static str {
        match self {
            Speaker::Usr => "<usr>",
            Speaker::Sys => "<sys>",
        }
    }
}

/// Dialogue history up to and including the current user utterance.
///
/// Segments alternate usr, sys, usr, sys, …, and always end with usr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    segments: Vec<(Speaker, Vec<String>)>,
}

impl Context {
    /// Builds a context, validating the alternation invariant.
    pub fn new(segments: Vec<(Speaker, Vec<String>)>) -> Result<Self, CorpusError> {
        if segments.is_empty() {
            return Err(CorpusError::invalid_belief("context has no segments"));
        }
        for (i, (speaker, _)) in segments.iter().enumerate() {
            let expected = if i % 2 == 0 { Speaker::Usr } else { Speaker::Sys };
            if *speaker != expected {
                return Err(CorpusError::invalid_belief(format!(
                    "context segment {i} has speaker {speaker:?}, expected {expected:?}"
                )));
            }
        }
        if segments.len() % 2 == 0 {
            return Err(CorpusError::invalid_belief(
                "context must end with a user segment",
            ));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(Speaker, Vec<String>)] {
        &self.segments
    }

    /// The final user utterance.
    pub fn current_utterance(&self) -> &[String] {
        &self.segments.last().expect("contexts are non-empty").1
    }

    /// Returns a copy with the final user utterance replaced.
    pub fn with_current_utterance(&self, utterance: Vec<String>) -> Self {
        let mut segments = self.segments.clone();
        segments.last_mut().expect("contexts are non-empty").1 = utterance;
        Self { segments }
    }

    /// Flattens to tokens with `<usr>` / `<sys>` speaker tags.
    pub fn to_tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (speaker, tokens) in &self.segments {
            out.push(speaker.tag().to_string());
            out.extend_from_slice(tokens);
        }
        out
    }
}

/// Per-domain informable constraints and requested slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    #[serde(default)]
    pub inform: BTreeMap<String, String>,
    #[serde(default)]
    pub request: BTreeSet<String>,
}

/// What the user wants out of the dialogue, used to score Inform/Success.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Goal {
    pub domains: BTreeMap<String, DomainGoal>,
}

impl Goal {
    pub fn is_empty(&self) -> bool {
        self.domains
            .values()
            .all(|g| g.inform.is_empty() && g.request.is_empty())
    }
}

/// One user/system exchange with gold annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub turn_index: usize,
    pub user_utterance: Vec<String>,
    pub system_response_delex: Vec<String>,
    pub system_response_lex: Vec<String>,
    pub belief: BeliefState,
    pub db: DbResult,
}

/// An ordered multi-turn session.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub domain_tags: BTreeSet<String>,
    pub turns: Vec<Turn>,
    pub goal: Goal,
}

impl Dialogue {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// Schema for one domain: informable slots and requestable slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub slots: BTreeSet<String>,
    pub requestables: BTreeSet<String>,
}

/// Ontology: every domain with its slot inventory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySchema {
    pub domains: BTreeMap<String, DomainSchema>,
}

impl OntologySchema {
    pub fn domain(&self, name: &str) -> Option<&DomainSchema> {
        self.domains.get(name)
    }

    /// True iff some domain declares `slot` as a slot or requestable.
    pub fn placeholder_slot_exists(&self, slot: &str) -> bool {
        self.domains
            .values()
            .any(|d| d.slots.contains(slot) || d.requestables.contains(slot))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CorpusError::Parse { line: 0, source })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CorpusError> {
        let text = serde_json::to_string_pretty(self).expect("schema serialization cannot fail");
        std::fs::write(path, text).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// A validated set of dialogues plus the ontology they conform to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DialogueCorpus {
    pub dialogues: Vec<Dialogue>,
    pub schema: OntologySchema,
}

impl DialogueCorpus {
    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    /// Total turn count across all dialogues.
    pub fn total_turns(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }
}

/// Builds the dialogue context for turn `t`:
/// `[U_0, R_0, …, U_{t-1}, R_{t-1}, U_t]`, using delexicalized responses.
pub fn build_context(dialogue: &Dialogue, t: usize) -> Result<Context, CorpusError> {
    if t >= dialogue.turns.len() {
        return Err(CorpusError::TurnOutOfRange {
            index: t,
            len: dialogue.turns.len(),
        });
    }
    let mut segments = Vec::with_capacity(2 * t + 1);
    for turn in &dialogue.turns[..t] {
        segments.push((Speaker::Usr, turn.user_utterance.clone()));
        segments.push((Speaker::Sys, turn.system_response_delex.clone()));
    }
    segments.push((Speaker::Usr, dialogue.turns[t].user_utterance.clone()));
    Context::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tokenize::toks;

    fn two_turn_dialogue() -> Dialogue {
        Dialogue {
            dialogue_id: "d1".to_string(),
            domain_tags: BTreeSet::from(["restaurant".to_string()]),
            turns: vec![
                Turn {
                    turn_index: 0,
                    user_utterance: toks("u0 a"),
                    system_response_delex: toks("r0 b"),
                    system_response_lex: toks("r0 b"),
                    belief: BeliefState::new(),
                    db: DbResult::none(),
                },
                Turn {
                    turn_index: 1,
                    user_utterance: toks("u1 c"),
                    system_response_delex: toks("r1 d"),
                    system_response_lex: toks("r1 d"),
                    belief: BeliefState::new(),
                    db: DbResult::none(),
                },
            ],
            goal: Goal::default(),
        }
    }

    #[test]
    fn context_at_turn_zero_has_only_the_first_utterance() {
        let d = two_turn_dialogue();
        let c = build_context(&d, 0).unwrap();
        assert_eq!(c.segments().len(), 1);
        assert_eq!(c.to_tokens(), toks("<usr> u0 a"));
    }

    #[test]
    fn context_at_turn_one_includes_history() {
        let d = two_turn_dialogue();
        let c = build_context(&d, 1).unwrap();
        assert_eq!(c.to_tokens(), toks("<usr> u0 a <sys> r0 b <usr> u1 c"));
    }

    #[test]
    fn context_prefix_law() {
        let d = two_turn_dialogue();
        let c0 = build_context(&d, 0).unwrap();
        let c1 = build_context(&d, 1).unwrap();
        let mut extended = c0.to_tokens();
        extended.extend(toks("<sys> r0 b <usr> u1 c"));
        assert_eq!(c1.to_tokens(), extended);
    }

    #[test]
    fn out_of_range_turn_is_an_error() {
        let d = two_turn_dialogue();
        assert!(matches!(
            build_context(&d, 2),
            Err(CorpusError::TurnOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn context_alternation_is_validated() {
        assert!(Context::new(vec![(Speaker::Sys, toks("x"))]).is_err());
        assert!(Context::new(vec![
            (Speaker::Usr, toks("x")),
            (Speaker::Sys, toks("y"))
        ])
        .is_err());
        assert!(Context::new(vec![]).is_err());
    }

    #[test]
    fn replacing_the_current_utterance() {
        let d = two_turn_dialogue();
        let c = build_context(&d, 1).unwrap();
        let c2 = c.with_current_utterance(toks("u1 rewritten"));
        assert_eq!(c2.current_utterance(), &toks("u1 rewritten")[..]);
        assert_eq!(c2.segments()[..2], c.segments()[..2]);
    }
}
