//! The low-resource study harness: trains and evaluates a grid of
//! (fraction, seed, variant) cells over a fixed train/test split and reports
//! per-cell metrics with mean ± std aggregates across seeds.

use serde::{Deserialize, Serialize};

use super::{train, LossWeights, TrainConfig, TrainError};
use crate::corpus::{subsample, DialogueCorpus};
use crate::dualdata::build_training_set;
use crate::eval::{evaluate_corpus, EvalError, MetricsReport, ReportMeta};
use crate::kb::KnowledgeBase;
use crate::neural::{InferLimits, ModelConfig, Seq2SeqModel, Vocab};
use crate::par;
use crate::seed::derive_seed;

/// Experiment variants: the baselines, the full method, and the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Forward objective only, no augmentation.
    Baseline,
    /// Dual objectives, no augmentation.
    Dl,
    /// Dual objectives with paraphrase expansion.
    Mdtod,
    /// Full minus paraphrase expansion.
    WoPara,
    /// Without the state↔utterance dual component.
    WoDu,
    /// Without the response↔utterance dual component.
    WoRu,
    /// Without both dual components (and no augmentation).
    WoBoth,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Baseline,
        Variant::Dl,
        Variant::Mdtod,
        Variant::WoPara,
        Variant::WoDu,
        Variant::WoRu,
        Variant::WoBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Dl => "dl",
            Variant::Mdtod => "mdtod",
            Variant::WoPara => "wo-para",
            Variant::WoDu => "wo-du",
            Variant::WoRu => "wo-ru",
            Variant::WoBoth => "wo-both",
        }
    }

    /// Adjusts weights and ablation flags for this variant.
    pub fn apply(self, cfg: &mut TrainConfig) {
        match self {
            Variant::Baseline | Variant::WoBoth => {
                cfg.loss_weights = LossWeights::forward_only();
                cfg.ablation.enable_para = false;
                cfg.ablation.enable_du_dl = false;
                cfg.ablation.enable_ru_dl = false;
            }
            Variant::Dl | Variant::WoPara => {
                cfg.loss_weights = LossWeights::default();
                cfg.ablation.enable_para = false;
            }
            Variant::Mdtod => {
                cfg.loss_weights = LossWeights::default();
                cfg.ablation.enable_para = true;
            }
            Variant::WoDu => {
                cfg.loss_weights = LossWeights::default();
                cfg.ablation.enable_du_dl = false;
            }
            Variant::WoRu => {
                cfg.loss_weights = LossWeights::default();
                cfg.ablation.enable_ru_dl = false;
            }
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Grid and environment for [`run_low_resource_study`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    /// Fraction of dialogues (by sorted id, from the end) held out as the
    /// fixed test split shared by every cell.
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub min_count: usize,
    /// Overrides the m-schedule for augmenting variants when set.
    #[serde(default)]
    pub m_override: Option<usize>,
}

impl StudyConfig {
    pub fn desk_default() -> Self {
        Self {
            fractions: vec![0.1],
            seeds: vec![1, 2, 3],
            variants: vec![Variant::Baseline, Variant::Dl, Variant::Mdtod],
            test_fraction: 0.2,
            train: TrainConfig::default(),
            model: ModelConfig::tiny(),
            min_count: 1,
            m_override: None,
        }
    }
}

/// One trained-and-evaluated grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyCell {
    pub fraction: f64,
    pub seed: u64,
    pub variant: Variant,
    pub m: usize,
    pub metrics: MetricsReport,
    pub steps: usize,
    pub wall_clock_s: f64,
}

/// Mean ± std across seeds for one (fraction, variant) group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyAggregate {
    pub fraction: f64,
    pub variant: Variant,
    pub seeds: usize,
    pub mean: AggregateStats,
    pub std: AggregateStats,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AggregateStats {
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
    pub jga: f64,
    pub goal_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub cells: Vec<StudyCell>,
    pub aggregates: Vec<StudyAggregate>,
}

impl StudyReport {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("report serialization cannot fail"),
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error("study config has an empty {0} list")]
    EmptyGrid(&'static str),
}

/// Splits a corpus into (train pool, test split) by sorted dialogue id: the
/// last `⌈test_fraction·N⌉` ids form the test split, identically for every
/// cell.
pub fn split_train_test(corpus: &DialogueCorpus, test_fraction: f64) -> (DialogueCorpus, DialogueCorpus) {
    let mut ids: Vec<&str> = corpus
        .dialogues
        .iter()
        .map(|d| d.dialogue_id.as_str())
        .collect();
    ids.sort_unstable();
    let test_count = ((test_fraction * ids.len() as f64).ceil() as usize).min(ids.len());
    let test_ids: std::collections::BTreeSet<&str> =
        ids[ids.len() - test_count..].iter().copied().collect();
    let mut train = DialogueCorpus {
        dialogues: Vec::new(),
        schema: corpus.schema.clone(),
    };
    let mut test = DialogueCorpus {
        dialogues: Vec::new(),
        schema: corpus.schema.clone(),
    };
    for dialogue in &corpus.dialogues {
        if test_ids.contains(dialogue.dialogue_id.as_str()) {
            test.dialogues.push(dialogue.clone());
        } else {
            train.dialogues.push(dialogue.clone());
        }
    }
    (train, test)
}

/// Trains and evaluates every (fraction, seed, variant) cell.
///
/// Cells are independent and run in parallel; the report lists them in grid
/// order with mean ± std aggregates per (fraction, variant) computed across
/// seeds.
pub fn run_low_resource_study(
    corpus: &DialogueCorpus,
    kb: &KnowledgeBase,
    cfg: &StudyConfig,
) -> Result<StudyReport, StudyError> {
    if cfg.fractions.is_empty() {
        return Err(StudyError::EmptyGrid("fractions"));
    }
    if cfg.seeds.is_empty() {
        return Err(StudyError::EmptyGrid("seeds"));
    }
    if cfg.variants.is_empty() {
        return Err(StudyError::EmptyGrid("variants"));
    }
    let (train_pool, test_split) = split_train_test(corpus, cfg.test_fraction);

    let mut grid = Vec::new();
    for &fraction in &cfg.fractions {
        for &seed in &cfg.seeds {
            for &variant in &cfg.variants {
                grid.push((fraction, seed, variant));
            }
        }
    }

    let results: Vec<Result<StudyCell, StudyError>> =
        par::map_ordered(&grid, |&(fraction, seed, variant)| {
            run_cell(&train_pool, &test_split, kb, cfg, fraction, seed, variant)
        });
    let mut cells = Vec::with_capacity(results.len());
    for result in results {
        cells.push(result?);
    }

    let mut aggregates = Vec::new();
    for &fraction in &cfg.fractions {
        for &variant in &cfg.variants {
            let group: Vec<&StudyCell> = cells
                .iter()
                .filter(|c| c.fraction == fraction && c.variant == variant)
                .collect();
            if group.is_empty() {
                continue;
            }
            aggregates.push(aggregate(fraction, variant, &group));
        }
    }
    Ok(StudyReport { cells, aggregates })
}

fn run_cell(
    train_pool: &DialogueCorpus,
    test_split: &DialogueCorpus,
    kb: &KnowledgeBase,
    cfg: &StudyConfig,
    fraction: f64,
    seed: u64,
    variant: Variant,
) -> Result<StudyCell, StudyError> {
    let started = std::time::Instant::now();
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    variant.apply(&mut train_cfg);
    let m = if train_cfg.ablation.enable_para {
        cfg.m_override.unwrap_or_else(|| train_cfg.m_for(fraction))
    } else {
        0
    };

    let train_corpus = subsample(train_pool, fraction, seed)?;
    let pairs = build_training_set(
        &train_corpus,
        kb,
        m,
        train_cfg.augment_strategy,
        derive_seed(seed, &["augment", variant.as_str()]),
    )?;
    let vocab = Vocab::build(&pairs, cfg.min_count)?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.init_seed = derive_seed(seed, &["init", variant.as_str()]);
    let model = Seq2SeqModel::new(model_cfg, vocab)?;
    let (model, log) = train(model, &pairs, &train_cfg)?;

    let metrics = evaluate_corpus(
        &model,
        test_split,
        kb,
        InferLimits::default(),
        ReportMeta {
            variant: variant.as_str().to_string(),
            fraction,
            seed,
        },
    )?;
    Ok(StudyCell {
        fraction,
        seed,
        variant,
        m,
        metrics,
        steps: log.steps.len(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

fn aggregate(fraction: f64, variant: Variant, group: &[&StudyCell]) -> StudyAggregate {
    let n = group.len() as f64;
    let pick = |f: &dyn Fn(&MetricsReport) -> f64| -> (f64, f64) {
        let values: Vec<f64> = group.iter().map(|c| f(&c.metrics)).collect();
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, variance.sqrt())
    };
    let (inform_mean, inform_std) = pick(&|m| m.inform);
    let (success_mean, success_std) = pick(&|m| m.success);
    let (bleu_mean, bleu_std) = pick(&|m| m.bleu);
    let (combined_mean, combined_std) = pick(&|m| m.combined);
    let (jga_mean, jga_std) = pick(&|m| m.jga);
    let (goal_mean, goal_std) = pick(&|m| m.goal_score);
    StudyAggregate {
        fraction,
        variant,
        seeds: group.len(),
        mean: AggregateStats {
            inform: inform_mean,
            success: success_mean,
            bleu: bleu_mean,
            combined: combined_mean,
            jga: jga_mean,
            goal_score: goal_mean,
        },
        std: AggregateStats {
            inform: inform_std,
            success: success_std,
            bleu: bleu_std,
            combined: combined_std,
            jga: jga_std,
            goal_score: goal_std,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_kb, generate_synthetic, GeneratorConfig};

    fn quick_study_cfg() -> StudyConfig {
        let mut cfg = StudyConfig::desk_default();
        cfg.fractions = vec![0.5];
        cfg.seeds = vec![7];
        cfg.variants = vec![Variant::Baseline];
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
    fn single_cell_study_emits_one_cell_and_one_aggregate() {
        let gen = GeneratorConfig {
            dialogues: 12,
            kb_rows_per_domain: 8,
            ..GeneratorConfig::default_desk()
        };
        let corpus = generate_synthetic(&gen, 3).unwrap();
        let kb = generate_kb(&gen, 3).unwrap();
        let report = run_low_resource_study(&corpus, &kb, &quick_study_cfg()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.aggregates.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.variant, Variant::Baseline);
        assert_eq!(cell.m, 0);
        assert!(cell.steps > 0);
        assert_eq!(report.aggregates[0].seeds, 1);
        assert_eq!(report.aggregates[0].std.combined, 0.0);
    }

    #[test]
    fn variant_strings_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("nonsense".parse::<Variant>().is_err());
    }

    #[test]
    fn wo_both_uses_forward_only_weights_without_augmentation() {
        let mut cfg = TrainConfig::default();
        Variant::WoBoth.apply(&mut cfg);
        let w = cfg.effective_weights();
        assert_eq!((w.fwd, w.b2c, w.r2c), (1.0, 0.0, 0.0));
        assert!(!cfg.ablation.enable_para);
        assert_eq!(cfg.m_for(0.05), 0);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let gen = GeneratorConfig {
            dialogues: 20,
            kb_rows_per_domain: 8,
            ..GeneratorConfig::default_desk()
        };
        let corpus = generate_synthetic(&gen, 5).unwrap();
        let (train_a, test_a) = split_train_test(&corpus, 0.25);
        let (train_b, test_b) = split_train_test(&corpus, 0.25);
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len() + test_a.len(), corpus.len());
        assert_eq!(test_a.len(), 5);
        for d in &test_a.dialogues {
            assert!(!train_a.dialogues.iter().any(|t| t.dialogue_id == d.dialogue_id));
        }
    }
}
