//! Materializes the dual mapping tasks as serialized training pairs.
//!
//! Three directions share one model: the forward task generates belief,
//! database bucket, and response from the context in a single cascaded
//! target; the two reverse tasks reconstruct the current user utterance from
//! the dialogue state or from the system response.

use serde::{Deserialize, Serialize};

use crate::augment::{expand_turn, AugmentStrategy};
use crate::corpus::{
    build_context, serialize_belief, BeliefState, Context, CorpusError, DialogueCorpus,
};
use crate::kb::{encode_db, query, DbResult, KnowledgeBase};
use crate::par;
use crate::seed::derive_seed;

pub const TASK_FWD: &str = "<task:fwd>";
pub const TASK_B2C: &str = "<task:b2c>";
pub const TASK_R2C: &str = "<task:r2c>";
pub const BS_MARKER: &str = "<bs>";
pub const DB_MARKER: &str = "<db>";
pub const RESP_MARKER: &str = "<resp>";
pub const EOS_TOKEN: &str = "<eos>";

/// Mapping task this pair trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// context → belief ⊕ db ⊕ response
    Fwd,
    /// dialogue state → user utterance
    B2c,
    /// system response → user utterance
    R2c,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Fwd, Direction::B2c, Direction::R2c];

    pub fn task_token(self) -> &'static str {
        match self {
            Direction::Fwd => TASK_FWD,
            Direction::B2c => TASK_B2C,
            Direction::R2c => TASK_R2C,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Fwd => "fwd",
            Direction::B2c => "b2c",
            Direction::R2c => "r2c",
        }
    }
}

/// Deterministic dialogue state: belief plus database result.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueState {
    pub belief: BeliefState,
    pub db: DbResult,
}

impl DialogueState {
    /// Couples a belief with the database result for it.
    pub fn from_query(kb: &KnowledgeBase, belief: BeliefState) -> Self {
        let db = query(kb, &belief);
        Self { belief, db }
    }

    /// Token rendering: canonical belief followed by `<db> [<bucket>]`.
    pub fn to_tokens(&self) -> Vec<String> {
        let mut tokens = serialize_belief(&self.belief);
        tokens.extend(encode_db(&self.db));
        tokens
    }
}

/// One serialized training unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub direction: Direction,
    pub input: Vec<String>,
    pub target: Vec<String>,
    pub dialogue_id: String,
    pub t: usize,
    pub j: usize,
}

/// Forward pair: tagged context in, cascaded belief/db/response out.
pub fn make_forward_pair(
    context: &Context,
    state: &DialogueState,
    response: &[String],
    dialogue_id: &str,
    t: usize,
    j: usize,
) -> TrainingPair {
    let mut input = vec![TASK_FWD.to_string()];
    input.extend(context.to_tokens());
    let mut target = vec![BS_MARKER.to_string()];
    target.extend(serialize_belief(&state.belief));
    target.extend(encode_db(&state.db));
    target.push(RESP_MARKER.to_string());
    target.extend_from_slice(response);
    target.push(EOS_TOKEN.to_string());
    TrainingPair {
        direction: Direction::Fwd,
        input,
        target,
        dialogue_id: dialogue_id.to_string(),
        t,
        j,
    }
}

/// Reverse pair: dialogue state in, current user utterance out.
pub fn make_b2c_pair(
    state: &DialogueState,
    utterance: &[String],
    dialogue_id: &str,
    t: usize,
    j: usize,
) -> TrainingPair {
    let mut input = vec![TASK_B2C.to_string()];
    input.extend(state.to_tokens());
    let mut target = utterance.to_vec();
    target.push(EOS_TOKEN.to_string());
    TrainingPair {
        direction: Direction::B2c,
        input,
        target,
        dialogue_id: dialogue_id.to_string(),
        t,
        j,
    }
}

/// Reverse pair: system response in, current user utterance out.
pub fn make_r2c_pair(
    response: &[String],
    utterance: &[String],
    dialogue_id: &str,
    t: usize,
    j: usize,
) -> TrainingPair {
    let mut input = vec![TASK_R2C.to_string()];
    input.extend_from_slice(response);
    let mut target = utterance.to_vec();
    target.push(EOS_TOKEN.to_string());
    TrainingPair {
        direction: Direction::R2c,
        input,
        target,
        dialogue_id: dialogue_id.to_string(),
        t,
        j,
    }
}

/// Builds the full training set over a (paraphrase-expanded) corpus.
///
/// For every dialogue, turn, and paraphrase index the three directions are
/// emitted together; output order is dialogue, then turn, then paraphrase
/// index, then direction, identical for serial and parallel runs.
pub fn build_training_set(
    corpus: &DialogueCorpus,
    kb: &KnowledgeBase,
    m: usize,
    strategy: AugmentStrategy,
    seed: u64,
) -> Result<Vec<TrainingPair>, CorpusError> {
    let per_dialogue: Vec<Result<Vec<TrainingPair>, CorpusError>> =
        par::map_ordered(&corpus.dialogues, |dialogue| {
            let mut pairs = Vec::new();
            for (t, turn) in dialogue.turns.iter().enumerate() {
                let context = build_context(dialogue, t)?;
                let state = DialogueState::from_query(kb, turn.belief.clone());
                let turn_seed = derive_seed(
                    seed,
                    &[&dialogue.dialogue_id, &t.to_string(), strategy.as_str()],
                );
                let expanded = expand_turn(turn, &state, m, strategy, turn_seed);
                for (j, variant) in expanded.pairs.iter().enumerate() {
                    let context_j = context.with_current_utterance(variant.utterance.clone());
                    pairs.push(make_forward_pair(
                        &context_j,
                        &state,
                        &variant.response,
                        &dialogue.dialogue_id,
                        t,
                        j,
                    ));
                    pairs.push(make_b2c_pair(
                        &state,
                        &variant.utterance,
                        &dialogue.dialogue_id,
                        t,
                        j,
                    ));
                    pairs.push(make_r2c_pair(
                        &variant.response,
                        &variant.utterance,
                        &dialogue.dialogue_id,
                        t,
                        j,
                    ));
                }
            }
            Ok(pairs)
        });
    let mut out = Vec::new();
    for result in per_dialogue {
        out.extend(result?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    dir: String,
    id: String,
    t: usize,
    j: usize,
    input: String,
    target: String,
}

/// Writes pairs as JSONL (`{"dir","id","t","j","input","target"}`).
pub fn save_pairs(pairs: &[TrainingPair], path: &std::path::Path) -> Result<(), CorpusError> {
    let mut lines = String::new();
    for pair in pairs {
        let record = PairRecord {
            dir: pair.direction.as_str().to_string(),
            id: pair.dialogue_id.clone(),
            t: pair.t,
            j: pair.j,
            input: pair.input.join(" "),
            target: pair.target.join(" "),
        };
        lines.push_str(&serde_json::to_string(&record).expect("pair serialization cannot fail"));
        lines.push('\n');
    }
    std::fs::write(path, lines).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a pair dump written by [`save_pairs`].
pub fn load_pairs(path: &std::path::Path) -> Result<Vec<TrainingPair>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord =
            serde_json::from_str(line).map_err(|source| CorpusError::Parse {
                line: i + 1,
                source,
            })?;
        let direction = match record.dir.as_str() {
            "fwd" => Direction::Fwd,
            "b2c" => Direction::B2c,
            "r2c" => Direction::R2c,
            other => {
                return Err(CorpusError::schema(
                    record.id,
                    format!("line {}", i + 1),
                    format!("unknown direction `{other}`"),
                ))
            }
        };
        pairs.push(TrainingPair {
            direction,
            input: record.input.split_whitespace().map(String::from).collect(),
            target: record.target.split_whitespace().map(String::from).collect(),
            dialogue_id: record.id,
            t: record.t,
            j: record.j,
        });
    }
    Ok(pairs)
}
