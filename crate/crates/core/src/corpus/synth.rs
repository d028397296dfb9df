//! Synthetic corpus generator: multi-domain sessions with per-turn gold
//! beliefs, goals, database results, and paired lexical/delexicalized
//! responses, all consistent with a generated knowledge base.
//!
//! Every template sentence carries at least two words with thesaurus
//! alternatives, so generated corpora are fully rewritable by the
//! augmentation module. Multi-domain dialogues visit domains in alphabetical
//! order, which keeps the active-domain query rule pointed at the domain
//! under discussion.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    tokenize::tokenize, BeliefState, CorpusError, Dialogue, DialogueCorpus,
    DomainSchema, Goal, OntologySchema, Turn,
};
use crate::kb::{query, EntityRow, KnowledgeBase};
use crate::seed::derive_seed;

const NAME_ADJECTIVES: &[&str] = &[
    "golden", "silver", "royal", "happy", "grand", "blue", "green", "crimson", "velvet", "lucky",
    "amber", "quiet",
];
const STREETS: &[&str] = &[
    "mill", "king", "queen", "bridge", "station", "market", "castle", "abbey",
];
const REQUESTABLES: &[&str] = &["address", "choice", "name", "phone"];

/// One domain's slot-value inventory and surface forms.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub noun: String,
    pub plural: String,
    pub informables: BTreeMap<String, Vec<String>>,
    /// Slot combinations usable in an opening utterance.
    pub opener_slot_combos: Vec<Vec<String>>,
    /// Second tokens for entity names (`golden dragon`, …).
    pub name_nouns: Vec<String>,
}

impl DomainSpec {
    fn pool(&self, slot: &str) -> &[String] {
        self.informables
            .get(slot)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Configuration for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub domains: Vec<DomainSpec>,
    pub dialogues: usize,
    pub kb_rows_per_domain: usize,
    /// Fraction of dialogues spanning two domains (needs ≥2 domains).
    pub multi_domain_fraction: f64,
    /// Probability of opening with constraints that match nothing, followed
    /// by a revision turn.
    pub no_match_detour_prob: f64,
    /// Probability that the request turn asks for both address and phone.
    pub both_requests_prob: f64,
    /// Documented turn-count bounds; generated dialogues stay inside them.
    pub min_turns: usize,
    pub max_turns: usize,
}

impl GeneratorConfig {
    /// Three-domain desk-scale default.
    pub fn default_desk() -> Self {
        let areas = vec!["centre", "north", "south", "east", "west"];
        let prices = vec!["cheap", "moderate", "expensive"];
        let restaurant = DomainSpec {
            name: "restaurant".into(),
            noun: "restaurant".into(),
            plural: "restaurants".into(),
            informables: BTreeMap::from([
                (
                    "food".to_string(),
                    str_vec(&[
                        "chinese",
                        "italian",
                        "indian",
                        "north indian",
                        "british",
                        "thai",
                        "french",
                        "modern european",
                    ]),
                ),
                ("area".to_string(), str_vec(&areas)),
                ("pricerange".to_string(), str_vec(&prices)),
            ]),
            opener_slot_combos: vec![
                str_vec(&["food", "area"]),
                str_vec(&["food"]),
                str_vec(&["pricerange", "area"]),
            ],
            name_nouns: str_vec(&["dragon", "palace", "garden", "kitchen", "table", "fork"]),
        };
        let hotel = DomainSpec {
            name: "hotel".into(),
            noun: "hotel".into(),
            plural: "hotels".into(),
            informables: BTreeMap::from([
                (
                    "stars".to_string(),
                    str_vec(&["two", "three", "four", "five"]),
                ),
                ("area".to_string(), str_vec(&areas)),
                ("pricerange".to_string(), str_vec(&prices)),
            ]),
            opener_slot_combos: vec![
                str_vec(&["area", "stars"]),
                str_vec(&["area"]),
                str_vec(&["area", "pricerange"]),
            ],
            name_nouns: str_vec(&["crown", "lodge", "towers", "arms", "inn", "house"]),
        };
        let attraction = DomainSpec {
            name: "attraction".into(),
            noun: "attraction".into(),
            plural: "attractions".into(),
            informables: BTreeMap::from([
                (
                    "type".to_string(),
                    str_vec(&["museum", "park", "cinema", "theatre", "gallery"]),
                ),
                ("area".to_string(), str_vec(&areas)),
                ("pricerange".to_string(), str_vec(&prices)),
            ]),
            opener_slot_combos: vec![
                str_vec(&["area", "type"]),
                str_vec(&["type"]),
                str_vec(&["area"]),
            ],
            name_nouns: str_vec(&["hall", "court", "dome", "grove", "pavilion"]),
        };
        Self {
            domains: vec![restaurant, hotel, attraction],
            dialogues: 200,
            kb_rows_per_domain: 24,
            multi_domain_fraction: 0.35,
            no_match_detour_prob: 0.3,
            both_requests_prob: 0.5,
            min_turns: 2,
            max_turns: 7,
        }
    }

    /// The ontology implied by this configuration.
    pub fn schema(&self) -> OntologySchema {
        let mut domains = BTreeMap::new();
        for spec in &self.domains {
            domains.insert(
                spec.name.clone(),
                DomainSchema {
                    slots: spec.informables.keys().cloned().collect(),
                    requestables: REQUESTABLES.iter().map(|s| s.to_string()).collect(),
                },
            );
        }
        OntologySchema { domains }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.domains.is_empty() {
            return Err(CorpusError::InvalidConfig(
                "generator needs at least one domain".into(),
            ));
        }
        for spec in &self.domains {
            if spec.informables.is_empty() {
                return Err(CorpusError::InvalidConfig(format!(
                    "domain `{}` has no informable slots",
                    spec.name
                )));
            }
            for (slot, pool) in &spec.informables {
                if pool.is_empty() {
                    return Err(CorpusError::InvalidConfig(format!(
                        "domain `{}` slot `{slot}` has an empty value pool",
                        spec.name
                    )));
                }
            }
            if spec.opener_slot_combos.is_empty() {
                return Err(CorpusError::InvalidConfig(format!(
                    "domain `{}` has no opener slot combinations",
                    spec.name
                )));
            }
            for combo in &spec.opener_slot_combos {
                for slot in combo {
                    if !spec.informables.contains_key(slot) {
                        return Err(CorpusError::InvalidConfig(format!(
                            "domain `{}` opener references unknown slot `{slot}`",
                            spec.name
                        )));
                    }
                }
                // The request turn always narrows with one more constraint.
                if combo.len() >= spec.informables.len() {
                    return Err(CorpusError::InvalidConfig(format!(
                        "domain `{}` opener combo {combo:?} leaves no spare slot",
                        spec.name
                    )));
                }
            }
            if spec.name_nouns.is_empty() {
                return Err(CorpusError::InvalidConfig(format!(
                    "domain `{}` has no entity name nouns",
                    spec.name
                )));
            }
            if NAME_ADJECTIVES.len() * spec.name_nouns.len() < self.kb_rows_per_domain {
                return Err(CorpusError::InvalidConfig(format!(
                    "domain `{}` cannot produce {} unique entity names",
                    spec.name, self.kb_rows_per_domain
                )));
            }
        }
        for p in [
            self.multi_domain_fraction,
            self.no_match_detour_prob,
            self.both_requests_prob,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::InvalidConfig(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
        }
        if self.min_turns > self.max_turns {
            return Err(CorpusError::InvalidConfig(
                "min_turns exceeds max_turns".into(),
            ));
        }
        Ok(())
    }
}

fn str_vec(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Generates the knowledge base implied by `(cfg, seed)`.
pub fn generate_kb(cfg: &GeneratorConfig, seed: u64) -> Result<KnowledgeBase, CorpusError> {
    cfg.validate()?;
    let mut tables = BTreeMap::new();
    for spec in &cfg.domains {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &["kb", &spec.name]));
        let mut name_pool: Vec<String> = NAME_ADJECTIVES
            .iter()
            .flat_map(|adj| spec.name_nouns.iter().map(move |n| format!("{adj} {n}")))
            .collect();
        shuffle(&mut name_pool, &mut rng);
        let mut rows = Vec::with_capacity(cfg.kb_rows_per_domain);
        for name in name_pool.into_iter().take(cfg.kb_rows_per_domain) {
            let mut row = EntityRow::new();
            row.insert("name".into(), name);
            for (slot, pool) in &spec.informables {
                row.insert(slot.clone(), pick(pool, &mut rng).clone());
            }
            let street = STREETS[rng.random_range(0..STREETS.len())];
            row.insert(
                "address".into(),
                format!("{} {street} street", rng.random_range(1..40)),
            );
            let digits: String = (0..8).map(|_| char::from(b'0' + rng.random_range(0..10) as u8)).collect();
            row.insert("phone".into(), format!("01{digits}"));
            rows.push(row);
        }
        tables.insert(spec.name.clone(), rows);
    }
    Ok(KnowledgeBase::new(tables))
}

/// Generates a corpus deterministic in `(cfg, seed)`, consistent with
/// [`generate_kb`] for the same inputs.
pub fn generate_synthetic(cfg: &GeneratorConfig, seed: u64) -> Result<DialogueCorpus, CorpusError> {
    cfg.validate()?;
    let kb = generate_kb(cfg, seed)?;
    let mut dialogues = Vec::with_capacity(cfg.dialogues);
    for i in 0..cfg.dialogues {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &["dialogue", &i.to_string()]));
        dialogues.push(generate_dialogue(cfg, &kb, format!("d{i:05}"), &mut rng));
    }
    Ok(DialogueCorpus {
        dialogues,
        schema: cfg.schema(),
    })
}

fn generate_dialogue(
    cfg: &GeneratorConfig,
    kb: &KnowledgeBase,
    dialogue_id: String,
    rng: &mut ChaCha20Rng,
) -> Dialogue {
    // Visit order is alphabetical so the active domain under the canonical
    // query rule is always the one being discussed.
    let mut visit: Vec<&DomainSpec> = Vec::new();
    let two = cfg.domains.len() >= 2 && rng.random_bool(cfg.multi_domain_fraction);
    if two {
        let a = rng.random_range(0..cfg.domains.len());
        let mut b = rng.random_range(0..cfg.domains.len() - 1);
        if b >= a {
            b += 1;
        }
        visit.push(&cfg.domains[a]);
        visit.push(&cfg.domains[b]);
        visit.sort_by(|x, y| x.name.cmp(&y.name));
    } else {
        visit.push(&cfg.domains[rng.random_range(0..cfg.domains.len())]);
    }

    let mut belief = BeliefState::new();
    let mut goal = Goal::default();
    let mut turns: Vec<Turn> = Vec::new();

    for (i, spec) in visit.iter().enumerate() {
        let last_domain = i + 1 == visit.len();
        run_domain_phase(
            cfg, kb, spec, &mut belief, &mut goal, &mut turns, rng, last_domain,
        );
    }

    debug_assert!(turns.len() >= cfg.min_turns && turns.len() <= cfg.max_turns);

    Dialogue {
        dialogue_id,
        domain_tags: visit.iter().map(|s| s.name.clone()).collect(),
        turns,
        goal,
    }
}

fn run_domain_phase(
    cfg: &GeneratorConfig,
    kb: &KnowledgeBase,
    spec: &DomainSpec,
    belief: &mut BeliefState,
    goal: &mut Goal,
    turns: &mut Vec<Turn>,
    rng: &mut ChaCha20Rng,
    last_domain: bool,
) {
    let rows = kb.rows(&spec.name);
    let target = &rows[rng.random_range(0..rows.len())];
    let combo = &spec.opener_slot_combos[rng.random_range(0..spec.opener_slot_combos.len())];

    // Opening constraints come from the target row; a detour replaces the
    // first slot's value with one that matches no row under the full combo.
    let mut constraints: Vec<(String, String)> = combo
        .iter()
        .map(|slot| (slot.clone(), target[slot].clone()))
        .collect();
    let mut detour_slot = None;
    if rng.random_bool(cfg.no_match_detour_prob) {
        if let Some(value) = find_detour_value(kb, spec, &constraints, rng) {
            detour_slot = Some(constraints[0].0.clone());
            constraints[0].1 = value;
        }
    }

    let opener_verb = if rng.random_bool(0.5) {
        "i am looking for"
    } else {
        "i want"
    };
    let greeting = if rng.random_bool(0.5) { "hello" } else { "hi" };
    let mut opener = format!("{greeting} , {opener_verb} a {}", spec.noun);
    for (slot, value) in &constraints {
        opener.push(' ');
        opener.push_str(&slot_phrase(slot, value));
    }
    opener.push_str(" . can you help me find one ?");

    for (slot, value) in &constraints {
        belief
            .insert(&spec.name, slot, value)
            .expect("generator values are well-formed");
    }
    let result = query(kb, belief);
    let response = if result.match_count == 0 {
        no_match_response(spec, &constraints.last().expect("combo non-empty").0)
    } else {
        offer_response(spec, result.match_count)
    };
    push_turn(turns, kb, belief, tokenize(&opener), response, Some(spec));

    // Revision turn: swap the detoured slot back to an achievable value.
    if let Some(slot) = detour_slot {
        let value = target[&slot].clone();
        let user = format!("that is too bad . how about {value} instead ?");
        belief
            .insert(&spec.name, &slot, &value)
            .expect("generator values are well-formed");
        let result = query(kb, belief);
        debug_assert!(result.match_count >= 1, "target row must match after revision");
        push_turn(
            turns,
            kb,
            belief,
            tokenize(&user),
            offer_response(spec, result.match_count),
            Some(spec),
        );
    }

    // Request turn: narrows with one spare constraint (so every turn changes
    // the belief state) and asks for requestables; the final domain's
    // exchange carries the farewell.
    let spare: Vec<&String> = spec
        .informables
        .keys()
        .filter(|slot| belief.get(&spec.name, slot).is_none())
        .collect();
    let spare_slot = spare[rng.random_range(0..spare.len())].clone();
    let spare_value = target[&spare_slot].clone();
    let both = rng.random_bool(cfg.both_requests_prob);
    let (ask, answer, requested): (&str, String, &[&str]) = if both {
        (
            "can you please tell me the address and the phone number ?",
            "the address is [value_address] and the phone number is [value_phone]".to_string(),
            &["address", "phone"],
        )
    } else if rng.random_bool(0.5) {
        (
            "can you please tell me the address ?",
            "the address is [value_address]".to_string(),
            &["address"],
        )
    } else {
        (
            "can you please tell me the phone number ?",
            "the phone number is [value_phone]".to_string(),
            &["phone"],
        )
    };
    let mut user = format!(
        "great , i want one {} . {ask}",
        slot_phrase(&spare_slot, &spare_value)
    );
    let mut response = format!(
        "sure , [value_name] is a {} {} . {answer} .",
        spec.noun,
        slot_phrase(&spare_slot, &format!("[value_{spare_slot}]"))
    );
    if last_domain {
        user.push_str(" thank you very much for the help , goodbye .");
        response.push_str(" you are welcome . have a wonderful day , goodbye .");
    }
    belief
        .insert(&spec.name, &spare_slot, &spare_value)
        .expect("generator values are well-formed");
    push_turn(turns, kb, belief, tokenize(&user), tokenize(&response), Some(spec));

    let domain_goal = goal.domains.entry(spec.name.clone()).or_default();
    for slot in requested {
        domain_goal.request.insert(slot.to_string());
    }
    domain_goal.inform = belief
        .slots(&spec.name)
        .expect("domain was constrained above")
        .clone();
}

/// Finds a value for the first constrained slot that makes the whole
/// combination match zero rows, or `None` if the pool has no such value.
fn find_detour_value(
    kb: &KnowledgeBase,
    spec: &DomainSpec,
    constraints: &[(String, String)],
    rng: &mut ChaCha20Rng,
) -> Option<String> {
    let slot = &constraints[0].0;
    let mut pool: Vec<&String> = spec.pool(slot).iter().collect();
    shuffle(&mut pool, rng);
    for value in pool {
        let mut probe = BeliefState::new();
        probe
            .insert(&spec.name, slot, value)
            .expect("pool values are well-formed");
        for (other_slot, other_value) in &constraints[1..] {
            probe
                .insert(&spec.name, other_slot, other_value)
                .expect("pool values are well-formed");
        }
        if query(kb, &probe).match_count == 0 {
            return Some(value.clone());
        }
    }
    None
}

fn slot_phrase(slot: &str, value: &str) -> String {
    match slot {
        "food" => format!("serving {value} food"),
        "area" => format!("in the {value}"),
        "pricerange" => format!("in the {value} price range"),
        "stars" => format!("rated {value} stars"),
        "type" => format!("of type {value}"),
        _ => format!("with {slot} {value}"),
    }
}

fn no_match_response(spec: &DomainSpec, violated_slot: &str) -> Vec<String> {
    tokenize(&format!(
        "i am sorry , there are no {} matching [value_{violated_slot}] in our records . would you like to try something different instead ?",
        spec.plural
    ))
}

fn offer_response(spec: &DomainSpec, match_count: usize) -> Vec<String> {
    if match_count == 1 {
        tokenize(&format!(
            "i found exactly [value_choice] {} matching your request . i would recommend [value_name] .",
            spec.noun
        ))
    } else {
        tokenize(&format!(
            "there are [value_choice] {} matching your request . i would recommend [value_name] . would you like more information ?",
            spec.plural
        ))
    }
}

/// Appends a turn, computing the gold database result and the lexicalized
/// response from the current belief.
fn push_turn(
    turns: &mut Vec<Turn>,
    kb: &KnowledgeBase,
    belief: &BeliefState,
    user: Vec<String>,
    response_delex: Vec<String>,
    spec: Option<&DomainSpec>,
) {
    let db = query(kb, belief);
    let response_lex = lexicalize(&response_delex, belief, &db, spec);
    turns.push(Turn {
        turn_index: turns.len(),
        user_utterance: user,
        system_response_delex: response_delex,
        system_response_lex: response_lex,
        belief: belief.clone(),
        db,
    });
}

fn lexicalize(
    response_delex: &[String],
    belief: &BeliefState,
    db: &crate::kb::DbResult,
    spec: Option<&DomainSpec>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(response_delex.len());
    for token in response_delex {
        let Some(slot) = super::io::placeholder_slot(token) else {
            out.push(token.clone());
            continue;
        };
        if slot == "choice" {
            out.push(db.match_count.to_string());
            continue;
        }
        let from_entity = db.selected.as_ref().and_then(|row| row.get(slot));
        let from_belief = spec.and_then(|s| belief.get(&s.name, slot));
        let value = from_entity.map(String::as_str).or(from_belief);
        match value {
            Some(v) => out.extend(v.split_whitespace().map(String::from)),
            None => out.push(token.clone()),
        }
    }
    out
}

fn pick<'a, T>(pool: &'a [T], rng: &mut ChaCha20Rng) -> &'a T {
    &pool[rng.random_range(0..pool.len())]
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha20Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::save_corpus;

    fn small_cfg() -> GeneratorConfig {
        GeneratorConfig {
            dialogues: 20,
            kb_rows_per_domain: 12,
            ..GeneratorConfig::default_desk()
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_corpora() {
        let cfg = small_cfg();
        let a = generate_synthetic(&cfg, 7).unwrap();
        let b = generate_synthetic(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let fa = tempfile::NamedTempFile::new().unwrap();
        let fb = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&a, fa.path()).unwrap();
        save_corpus(&b, fb.path()).unwrap();
        assert_eq!(
            std::fs::read(fa.path()).unwrap(),
            std::fs::read(fb.path()).unwrap()
        );
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = small_cfg();
        let a = generate_synthetic(&cfg, 7).unwrap();
        let b = generate_synthetic(&cfg, 8).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn domain_tags_within_config_and_turns_within_bounds() {
        let mut cfg = GeneratorConfig::default_desk();
        cfg.dialogues = 200;
        let corpus = generate_synthetic(&cfg, 11).unwrap();
        assert_eq!(corpus.len(), 200);
        let allowed: Vec<&str> = cfg.domains.iter().map(|d| d.name.as_str()).collect();
        let mut total_turns = 0usize;
        for dialogue in &corpus.dialogues {
            assert!(!dialogue.turns.is_empty());
            for tag in &dialogue.domain_tags {
                assert!(allowed.contains(&tag.as_str()));
            }
            assert!(dialogue.turns.len() >= cfg.min_turns);
            assert!(dialogue.turns.len() <= cfg.max_turns);
            total_turns += dialogue.turns.len();
        }
        let mean = total_turns as f64 / corpus.len() as f64;
        assert!(mean >= cfg.min_turns as f64 && mean <= cfg.max_turns as f64);
    }

    #[test]
    fn single_domain_config_tags_one_domain_per_dialogue() {
        let mut cfg = small_cfg();
        cfg.domains.truncate(1);
        cfg.multi_domain_fraction = 0.0;
        let corpus = generate_synthetic(&cfg, 3).unwrap();
        for dialogue in &corpus.dialogues {
            assert_eq!(dialogue.domain_tags.len(), 1);
        }
    }

    #[test]
    fn generated_corpus_passes_loader_validation() {
        let cfg = small_cfg();
        let corpus = generate_synthetic(&cfg, 5).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&corpus, f.path()).unwrap();
        let reloaded = crate::corpus::load_corpus(f.path(), cfg.schema()).unwrap();
        assert_eq!(reloaded.len(), corpus.len());
        // The loader does not carry db results; compare the rest.
        for (a, b) in corpus.dialogues.iter().zip(&reloaded.dialogues) {
            assert_eq!(a.dialogue_id, b.dialogue_id);
            assert_eq!(a.goal, b.goal);
            for (ta, tb) in a.turns.iter().zip(&b.turns) {
                assert_eq!(ta.user_utterance, tb.user_utterance);
                assert_eq!(ta.system_response_delex, tb.system_response_delex);
                assert_eq!(ta.system_response_lex, tb.system_response_lex);
                assert_eq!(ta.belief, tb.belief);
            }
        }
    }

    #[test]
    fn kb_validates_against_schema_and_is_deterministic() {
        let cfg = small_cfg();
        let kb1 = generate_kb(&cfg, 7).unwrap();
        let kb2 = generate_kb(&cfg, 7).unwrap();
        assert_eq!(kb1, kb2);
        kb1.validate(&cfg.schema()).unwrap();
        for spec in &cfg.domains {
            assert_eq!(kb1.rows(&spec.name).len(), cfg.kb_rows_per_domain);
        }
    }

    #[test]
    fn turn_db_is_consistent_with_query_rule() {
        let cfg = small_cfg();
        let kb = generate_kb(&cfg, 5).unwrap();
        let corpus = generate_synthetic(&cfg, 5).unwrap();
        for dialogue in &corpus.dialogues {
            for turn in &dialogue.turns {
                assert_eq!(turn.db, query(&kb, &turn.belief));
            }
        }
    }

    #[test]
    fn offers_match_goal_constraints() {
        // Every dialogue's final belief per domain admits at least one row,
        // so gold responses can always inform.
        let cfg = small_cfg();
        let kb = generate_kb(&cfg, 9).unwrap();
        let corpus = generate_synthetic(&cfg, 9).unwrap();
        for dialogue in &corpus.dialogues {
            for (domain, goal) in &dialogue.goal.domains {
                let mut belief = BeliefState::new();
                for (slot, value) in &goal.inform {
                    belief.insert(domain, slot, value).unwrap();
                }
                assert!(
                    query(&kb, &belief).match_count >= 1,
                    "goal constraints for {domain} must be satisfiable"
                );
            }
        }
    }

    #[test]
    fn empty_domain_list_is_invalid() {
        let mut cfg = small_cfg();
        cfg.domains.clear();
        assert!(matches!(
            generate_synthetic(&cfg, 1),
            Err(CorpusError::InvalidConfig(_))
        ));
    }
}
