//! Leave-one-domain-out generalization harness: train on dialogues that
//! never touch the holdout domain, evaluate Goal Score and BLEU on dialogues
//! that do, sweeping the paraphrase count.

use serde::{Deserialize, Serialize};

use super::{evaluate_corpus, EvalError, ReportMeta};
use crate::augment::AugmentStrategy;
use crate::corpus::DialogueCorpus;
use crate::dualdata::build_training_set;
use crate::kb::KnowledgeBase;
use crate::neural::{InferLimits, ModelConfig, Seq2SeqModel, Vocab};
use crate::seed::derive_seed;
use crate::train::{train, TrainConfig};

/// Configuration for [`cross_domain_eval`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossDomainConfig {
    /// Paraphrase counts to sweep.
    pub ms: Vec<usize>,
    pub strategy: AugmentStrategy,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub min_count: usize,
}

impl CrossDomainConfig {
    pub fn desk_default() -> Self {
        Self {
            ms: vec![0, 1, 2],
            strategy: AugmentStrategy::Para,
            train: TrainConfig::default(),
            model: ModelConfig::tiny(),
            min_count: 1,
        }
    }
}

/// One row of the sweep: Goal Score and BLEU at a paraphrase count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossDomainRow {
    pub m: usize,
    pub goal_score: f64,
    pub bleu: f64,
    pub combined: f64,
    pub jga: f64,
}

/// The sweep report plus the split audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossDomainReport {
    pub holdout: String,
    pub rows: Vec<CrossDomainRow>,
    pub train_dialogues: usize,
    pub eval_dialogues: usize,
    /// Train-split turns referencing the holdout domain; always zero.
    pub leakage_turns: usize,
}

impl CrossDomainReport {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("report serialization cannot fail"),
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrossDomainError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}

/// Trains on all dialogues containing no turn in the holdout domain and
/// evaluates only on dialogues that contain it, once per paraphrase count.
pub fn cross_domain_eval(
    corpus: &DialogueCorpus,
    kb: &KnowledgeBase,
    holdout_domain: &str,
    cfg: &CrossDomainConfig,
) -> Result<CrossDomainReport, CrossDomainError> {
    let mut train_split = DialogueCorpus {
        dialogues: Vec::new(),
        schema: corpus.schema.clone(),
    };
    let mut eval_split = DialogueCorpus {
        dialogues: Vec::new(),
        schema: corpus.schema.clone(),
    };
    for dialogue in &corpus.dialogues {
        if dialogue.domain_tags.contains(holdout_domain) {
            eval_split.dialogues.push(dialogue.clone());
        } else {
            train_split.dialogues.push(dialogue.clone());
        }
    }
    if eval_split.is_empty() {
        return Err(EvalError::HoldoutMissing(holdout_domain.to_string()).into());
    }
    if train_split.is_empty() {
        return Err(EvalError::EmptyTrainSplit(holdout_domain.to_string()).into());
    }

    // Split audit: the train side must never mention the holdout domain.
    let leakage_turns = train_split
        .dialogues
        .iter()
        .flat_map(|d| d.turns.iter())
        .filter(|turn| turn.belief.domains().any(|dom| dom == holdout_domain))
        .count();
    assert_eq!(leakage_turns, 0, "leave-one-domain-out split leaked turns");

    let mut rows = Vec::with_capacity(cfg.ms.len());
    for &m in &cfg.ms {
        let mut train_cfg = cfg.train.clone();
        train_cfg.augment_strategy = cfg.strategy;
        let pairs = build_training_set(
            &train_split,
            kb,
            m,
            cfg.strategy,
            derive_seed(train_cfg.seed, &["cross-domain", &m.to_string()]),
        )?;
        let vocab = Vocab::build(&pairs, cfg.min_count)?;
        let mut model_cfg = cfg.model.clone();
        model_cfg.init_seed = derive_seed(train_cfg.seed, &["cross-init", &m.to_string()]);
        let model = Seq2SeqModel::new(model_cfg, vocab)?;
        let (model, _) = train(model, &pairs, &train_cfg)?;
        let metrics = evaluate_corpus(
            &model,
            &eval_split,
            kb,
            InferLimits::default(),
            ReportMeta {
                variant: format!("cross-domain-m{m}"),
                fraction: 1.0,
                seed: train_cfg.seed,
            },
        )?;
        rows.push(CrossDomainRow {
            m,
            goal_score: metrics.goal_score,
            bleu: metrics.bleu,
            combined: metrics.combined,
            jga: metrics.jga,
        });
    }

    Ok(CrossDomainReport {
        holdout: holdout_domain.to_string(),
        rows,
        train_dialogues: train_split.len(),
        eval_dialogues: eval_split.len(),
        leakage_turns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_kb, generate_synthetic, GeneratorConfig};

    fn tiny_cross_cfg() -> CrossDomainConfig {
        let mut cfg = CrossDomainConfig::desk_default();
        cfg.ms = vec![0];
        cfg.model = ModelConfig {
            layers: 1,
            d_model: 16,
            heads: 2,
            d_ff: 32,
            max_src_len: 160,
            max_tgt_len: 80,
            zero_init_projection: false,
            init_seed: 0,
        };
        cfg.train.epochs = 1;
        cfg.train.batch_size = 16;
        cfg
    }

    #[test]
    fn missing_holdout_domain_is_an_error() {
        let gen = GeneratorConfig {
            dialogues: 6,
            kb_rows_per_domain: 8,
            ..GeneratorConfig::default_desk()
        };
        let corpus = generate_synthetic(&gen, 2).unwrap();
        let kb = generate_kb(&gen, 2).unwrap();
        assert!(matches!(
            cross_domain_eval(&corpus, &kb, "spaceport", &tiny_cross_cfg()),
            Err(CrossDomainError::Eval(EvalError::HoldoutMissing(_)))
        ));
    }

    #[test]
    fn holdout_covering_everything_is_an_error() {
        let mut gen = GeneratorConfig {
            dialogues: 5,
            kb_rows_per_domain: 8,
            multi_domain_fraction: 0.0,
            ..GeneratorConfig::default_desk()
        };
        gen.domains.truncate(1); // every dialogue is restaurant-only
        let corpus = generate_synthetic(&gen, 2).unwrap();
        let kb = generate_kb(&gen, 2).unwrap();
        assert!(matches!(
            cross_domain_eval(&corpus, &kb, "restaurant", &tiny_cross_cfg()),
            Err(CrossDomainError::Eval(EvalError::EmptyTrainSplit(_)))
        ));
    }

    #[test]
    fn report_rows_follow_the_m_sweep_and_split_is_audited() {
        let gen = GeneratorConfig {
            dialogues: 14,
            kb_rows_per_domain: 8,
            ..GeneratorConfig::default_desk()
        };
        let corpus = generate_synthetic(&gen, 4).unwrap();
        let kb = generate_kb(&gen, 4).unwrap();
        let mut cfg = tiny_cross_cfg();
        cfg.ms = vec![0, 1];
        let report = cross_domain_eval(&corpus, &kb, "attraction", &cfg).unwrap();
        assert_eq!(report.holdout, "attraction");
        assert_eq!(report.leakage_turns, 0);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].m, 0);
        assert_eq!(report.rows[1].m, 1);
        assert!(report.train_dialogues > 0 && report.eval_dialogues > 0);
        assert_eq!(
            report.train_dialogues + report.eval_dialogues,
            corpus.len()
        );
    }
}
