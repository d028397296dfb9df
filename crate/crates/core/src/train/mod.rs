//! Optimization: the combined dual loss, the warmup/decay schedule, and the
//! AdamW training loop with direction-balanced batches.
//!
//! Each optimizer step sees all three directions for the same sample
//! triples, so the summed loss matches the combined objective exactly and
//! the equivalence tests can compare two computation paths at 1e-12.

mod study;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use study::{run_low_resource_study, StudyCell, StudyConfig, StudyReport, Variant};

use crate::augment::AugmentStrategy;
use crate::dualdata::{Direction, TrainingPair};
use crate::neural::{Batch, NeuralError, Params, Seq2SeqModel};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at step {step}; last good checkpoint attached")]
    NonFinite {
        step: usize,
        checkpoint: Box<Seq2SeqModel>,
    },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Per-direction loss weights. Ablations zero individual entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub fwd: f64,
    pub b2c: f64,
    pub r2c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            fwd: 1.0,
            b2c: 1.0,
            r2c: 1.0,
        }
    }
}

impl LossWeights {
    pub fn forward_only() -> Self {
        Self {
            fwd: 1.0,
            b2c: 0.0,
            r2c: 0.0,
        }
    }
}

/// Ablation switches: paraphrase expansion and the two dual components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub enable_para: bool,
    pub enable_du_dl: bool,
    pub enable_ru_dl: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            enable_para: true,
            enable_du_dl: true,
            enable_ru_dl: true,
        }
    }
}

/// Maps a training fraction to the paraphrase count `m`: the first entry
/// whose fraction bound covers the input wins, otherwise 0. Lower-resource
/// runs get more paraphrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSchedule {
    /// `(max_fraction, m)` entries sorted by fraction ascending.
    pub entries: Vec<(f64, usize)>,
}

impl Default for MSchedule {
    fn default() -> Self {
        Self {
            entries: vec![(0.05, 2), (0.20, 1)],
        }
    }
}

impl MSchedule {
    pub fn m_for(&self, fraction: f64) -> usize {
        for &(bound, m) in &self.entries {
            if fraction <= bound {
                return m;
            }
        }
        0
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub m_schedule: MSchedule,
    pub augment_strategy: AugmentStrategy,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub ablation: AblationFlags,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Hard cap on optimizer steps; `None` runs all epochs.
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Stop after any epoch whose training token accuracy reaches this.
    #[serde(default)]
    pub target_token_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 8e-4,
            warmup_ratio: 0.2,
            epochs: 10,
            batch_size: 8,
            m_schedule: MSchedule::default(),
            augment_strategy: AugmentStrategy::Para,
            loss_weights: LossWeights::default(),
            seed: 0,
            ablation: AblationFlags::default(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.01,
            max_steps: None,
            target_token_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(TrainError::InvalidConfig(format!(
                "warmup ratio {} outside [0, 1)",
                self.warmup_ratio
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig(
                "batch size must be positive".into(),
            ));
        }
        let w = self.loss_weights;
        if w.fwd < 0.0 || w.b2c < 0.0 || w.r2c < 0.0 {
            return Err(TrainError::InvalidConfig(
                "loss weights must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Loss weights after applying the ablation flags.
    pub fn effective_weights(&self) -> LossWeights {
        LossWeights {
            fwd: self.loss_weights.fwd,
            b2c: if self.ablation.enable_du_dl {
                self.loss_weights.b2c
            } else {
                0.0
            },
            r2c: if self.ablation.enable_ru_dl {
                self.loss_weights.r2c
            } else {
                0.0
            },
        }
    }

    /// Paraphrase count for a training fraction, honoring the para flag.
    pub fn m_for(&self, fraction: f64) -> usize {
        if self.ablation.enable_para {
            self.m_schedule.m_for(fraction)
        } else {
            0
        }
    }
}

/// Linear warmup to `base_lr` over the first `⌈warmup_ratio·total⌉` steps,
/// then linear decay to zero at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, warmup_ratio: f64, base_lr: f64) -> f64 {
    if total_steps == 0 || step > total_steps {
        return 0.0;
    }
    let warmup_end = ((warmup_ratio * total_steps as f64).ceil() as usize).min(total_steps - 1);
    if step <= warmup_end && warmup_end > 0 {
        base_lr * step as f64 / warmup_end as f64
    } else {
        base_lr * (total_steps - step) as f64 / (total_steps - warmup_end) as f64
    }
}

/// The combined dual objective:
/// `w_fwd·nll(fwd) + w_b2c·nll(b2c) + w_r2c·nll(r2c)`.
///
/// Zero-weighted terms are skipped entirely, so weights `(1,0,0)` equal the
/// plain forward loss exactly.
pub fn dual_loss(
    model: &Seq2SeqModel,
    fwd_batch: &Batch,
    b2c_batch: &Batch,
    r2c_batch: &Batch,
    weights: LossWeights,
) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for (weight, batch) in [
        (weights.fwd, fwd_batch),
        (weights.b2c, b2c_batch),
        (weights.r2c, r2c_batch),
    ] {
        if weight != 0.0 && !batch.is_empty() {
            total += weight * model.nll(batch)?;
        }
    }
    Ok(total)
}

/// Per-step log entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub loss_fwd: f64,
    pub loss_b2c: f64,
    pub loss_r2c: f64,
}

/// Per-epoch snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub token_accuracy: f64,
}

/// Full training trace.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
    /// Wall-clock seconds; excluded from determinism comparisons.
    pub elapsed_s: f64,
}

impl TrainLog {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("log serialization cannot fail"),
        )
    }
}

/// One (dialogue, turn, paraphrase-index) sample with its three directions.
struct Triple {
    fwd: Option<usize>,
    b2c: Option<usize>,
    r2c: Option<usize>,
}

fn group_triples(pairs: &[TrainingPair]) -> Vec<Triple> {
    let mut index: std::collections::BTreeMap<(&str, usize, usize), usize> =
        std::collections::BTreeMap::new();
    let mut triples: Vec<Triple> = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let key = (pair.dialogue_id.as_str(), pair.t, pair.j);
        let slot = *index.entry(key).or_insert_with(|| {
            triples.push(Triple {
                fwd: None,
                b2c: None,
                r2c: None,
            });
            triples.len() - 1
        });
        match pair.direction {
            Direction::Fwd => triples[slot].fwd = Some(i),
            Direction::B2c => triples[slot].b2c = Some(i),
            Direction::R2c => triples[slot].r2c = Some(i),
        }
    }
    triples
}

struct AdamState {
    m: Params,
    v: Params,
    t: usize,
}

fn adamw_update(
    params: &mut Params,
    grad: &Params,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let bias1 = 1.0 - b1.powi(state.t as i32);
    let bias2 = 1.0 - b2.powi(state.t as i32);

    let g_blocks = grad.blocks();
    let mut m_blocks = state.m.blocks_mut();
    let mut v_blocks = state.v.blocks_mut();
    for (b, p) in params.blocks_mut().into_iter().enumerate() {
        let g = g_blocks[b];
        let m = &mut m_blocks[b];
        let v = &mut v_blocks[b];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.adam_eps) + cfg.weight_decay * p[i]);
        }
    }
}

/// Trains the model on the pair set with AdamW and the linear schedule.
///
/// Batches are direction-balanced: every step draws a chunk of sample
/// triples and runs all three directions over it with the configured
/// weights. Deterministic in `(model, pairs, cfg)`. A non-finite loss or
/// gradient aborts before the update, returning the last good model inside
/// the error.
pub fn train(
    model: Seq2SeqModel,
    pairs: &[TrainingPair],
    cfg: &TrainConfig,
) -> Result<(Seq2SeqModel, TrainLog), TrainError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let start = std::time::Instant::now();
    let mut model = model;
    let triples = group_triples(pairs);
    let steps_per_epoch = triples.len().div_ceil(cfg.batch_size);
    let mut total_steps = cfg.epochs * steps_per_epoch;
    if let Some(cap) = cfg.max_steps {
        total_steps = total_steps.min(cap);
    }

    let weights = cfg.effective_weights();
    let mut log = TrainLog::default();
    let mut adam = AdamState {
        m: model.params.zeros_like(),
        v: model.params.zeros_like(),
        t: 0,
    };

    let mut step = 0usize;
    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..triples.len()).collect();
        shuffle(&mut order, derive_seed(cfg.seed, &["epoch", &epoch.to_string()]));
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            if step >= total_steps {
                break 'epochs;
            }
            let lr = lr_at(step, total_steps, cfg.warmup_ratio, cfg.learning_rate);

            let picks: [(f64, fn(&Triple) -> Option<usize>); 3] = [
                (weights.fwd, |t| t.fwd),
                (weights.b2c, |t| t.b2c),
                (weights.r2c, |t| t.r2c),
            ];
            let mut combined: Option<Params> = None;
            let mut losses = [0.0f64; 3];
            let mut total_loss = 0.0;
            for (slot, (weight, pick)) in picks.into_iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                let selected: Vec<&TrainingPair> = chunk
                    .iter()
                    .filter_map(|&i| pick(&triples[i]).map(|p| &pairs[p]))
                    .collect();
                if selected.is_empty() {
                    continue;
                }
                let batch = Batch::from_pairs(
                    &selected,
                    &model.vocab,
                    model.config.max_src_len,
                    model.config.max_tgt_len,
                );
                let (loss, mut grad) = model.grads(&batch)?;
                losses[slot] = loss;
                total_loss += weight * loss;
                grad.scale(weight);
                match &mut combined {
                    Some(acc) => acc.add_assign(&grad),
                    None => combined = Some(grad),
                }
            }

            if !total_loss.is_finite() {
                return Err(TrainError::NonFinite {
                    step,
                    checkpoint: Box::new(model),
                });
            }
            if let Some(grad) = combined {
                if grad.first_non_finite().is_some() {
                    return Err(TrainError::NonFinite {
                        step,
                        checkpoint: Box::new(model),
                    });
                }
                adamw_update(&mut model.params, &grad, &mut adam, lr, cfg);
            }
            log.steps.push(StepLog {
                step,
                lr,
                loss: total_loss,
                loss_fwd: losses[0],
                loss_b2c: losses[1],
                loss_r2c: losses[2],
            });
            epoch_loss += total_loss;
            epoch_steps += 1;
            step += 1;
        }

        let accuracy = training_token_accuracy(&model, pairs)?;
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: if epoch_steps > 0 {
                epoch_loss / epoch_steps as f64
            } else {
                0.0
            },
            token_accuracy: accuracy,
        });
        if let Some(target) = cfg.target_token_accuracy {
            if accuracy >= target {
                break;
            }
        }
    }

    log.elapsed_s = start.elapsed().as_secs_f64();
    Ok((model, log))
}

/// Teacher-forced token accuracy over (a deterministic prefix of) the
/// training pairs.
pub fn training_token_accuracy(
    model: &Seq2SeqModel,
    pairs: &[TrainingPair],
) -> Result<f64, NeuralError> {
    const ACCURACY_SAMPLE_CAP: usize = 1024;
    let take = pairs.len().min(ACCURACY_SAMPLE_CAP);
    let refs: Vec<&TrainingPair> = pairs[..take].iter().collect();
    let batch = Batch::from_pairs(
        &refs,
        &model.vocab,
        model.config.max_src_len,
        model.config.max_tgt_len,
    );
    model.token_accuracy(&batch)
}

fn shuffle(items: &mut [usize], seed: u64) {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;
    use crate::neural::{ModelConfig, Vocab};

    fn pairs_fixture() -> Vec<TrainingPair> {
        let mut pairs = Vec::new();
        for (i, (u, r)) in [
            ("aa bb", "xx yy"),
            ("bb cc", "yy zz"),
            ("cc dd", "zz xx"),
            ("dd aa", "xx zz"),
        ]
        .iter()
        .enumerate()
        {
            let id = format!("d{i}");
            pairs.push(TrainingPair {
                direction: Direction::Fwd,
                input: toks(&format!("<task:fwd> <usr> {u}")),
                target: toks(&format!("<bs> [none] <db> [db_none] <resp> {r} <eos>")),
                dialogue_id: id.clone(),
                t: 0,
                j: 0,
            });
            pairs.push(TrainingPair {
                direction: Direction::B2c,
                input: toks("<task:b2c> [none] <db> [db_none]"),
                target: toks(&format!("{u} <eos>")),
                dialogue_id: id.clone(),
                t: 0,
                j: 0,
            });
            pairs.push(TrainingPair {
                direction: Direction::R2c,
                input: toks(&format!("<task:r2c> {r}")),
                target: toks(&format!("{u} <eos>")),
                dialogue_id: id,
                t: 0,
                j: 0,
            });
        }
        pairs
    }

    fn model_for(pairs: &[TrainingPair]) -> Seq2SeqModel {
        let vocab = Vocab::build(pairs, 1).unwrap();
        Seq2SeqModel::new(ModelConfig::sanity(), vocab).unwrap()
    }

    #[test]
    fn lr_schedule_endpoints_and_interior() {
        assert_eq!(lr_at(0, 100, 0.2, 8e-4), 0.0);
        assert_eq!(lr_at(20, 100, 0.2, 8e-4), 8e-4);
        // Closed-form linear interpolation past warmup.
        let lr = lr_at(60, 100, 0.2, 8e-4);
        assert!((lr - 4e-4).abs() < 1e-18, "{lr}");
        assert_eq!(lr_at(100, 100, 0.2, 8e-4), 0.0);
    }

    #[test]
    fn lr_schedule_is_continuous_and_peaks_at_base() {
        let total = 57;
        let base = 3e-4;
        let ratio = 0.31;
        let mut previous = lr_at(0, total, ratio, base);
        let mut peak = previous;
        for step in 1..=total {
            let lr = lr_at(step, total, ratio, base);
            assert!((lr - previous).abs() <= base / 10.0, "jump at {step}");
            peak = peak.max(lr);
            previous = lr;
        }
        assert!((peak - base).abs() < 1e-18);
    }

    #[test]
    fn dual_loss_reductions() {
        let pairs = pairs_fixture();
        let model = model_for(&pairs);
        let by_dir = |d: Direction| -> Batch {
            let selected: Vec<&TrainingPair> =
                pairs.iter().filter(|p| p.direction == d).collect();
            Batch::from_pairs(&selected, &model.vocab, 128, 128)
        };
        let fwd = by_dir(Direction::Fwd);
        let b2c = by_dir(Direction::B2c);
        let r2c = by_dir(Direction::R2c);

        let forward_only =
            dual_loss(&model, &fwd, &b2c, &r2c, LossWeights::forward_only()).unwrap();
        assert_eq!(forward_only, model.nll(&fwd).unwrap());

        let zero = dual_loss(
            &model,
            &fwd,
            &b2c,
            &r2c,
            LossWeights {
                fwd: 0.0,
                b2c: 0.0,
                r2c: 0.0,
            },
        )
        .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn dual_loss_matches_independent_reference_computation() {
        // Two-path check: batched per-direction means vs per-pair losses
        // recombined by token counts.
        let pairs = pairs_fixture();
        let model = model_for(&pairs);
        let by_dir = |d: Direction| -> Vec<&TrainingPair> {
            pairs.iter().filter(|p| p.direction == d).collect()
        };
        let batch_of = |sel: &[&TrainingPair]| Batch::from_pairs(sel, &model.vocab, 128, 128);

        let fwd = by_dir(Direction::Fwd);
        let b2c = by_dir(Direction::B2c);
        let r2c = by_dir(Direction::R2c);
        let fast = dual_loss(
            &model,
            &batch_of(&fwd),
            &batch_of(&b2c),
            &batch_of(&r2c),
            LossWeights::default(),
        )
        .unwrap();

        let mut reference = 0.0;
        for group in [&fwd, &b2c, &r2c] {
            let mut loss_sum = 0.0;
            let mut tokens = 0usize;
            for pair in group.iter() {
                let single = batch_of(&[pair]);
                let mean = model.nll(&single).unwrap();
                loss_sum += mean * pair.target.len() as f64;
                tokens += pair.target.len();
            }
            reference += loss_sum / tokens as f64;
        }
        assert!(
            (fast - reference).abs() <= 1e-12 * fast.abs().max(1.0),
            "fast {fast} vs reference {reference}"
        );
    }

    #[test]
    fn zero_epochs_leaves_parameters_unchanged() {
        let pairs = pairs_fixture();
        let model = model_for(&pairs);
        let before = model.params.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (after, log) = train(model, &pairs, &cfg).unwrap();
        assert_eq!(after.params, before);
        assert!(log.steps.is_empty());
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let pairs = pairs_fixture();
        let model = model_for(&pairs);
        assert!(matches!(
            train(model, &[], &TrainConfig::default()),
            Err(TrainError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let pairs = pairs_fixture();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let (m1, log1) = train(model_for(&pairs), &pairs, &cfg).unwrap();
        let (m2, log2) = train(model_for(&pairs), &pairs, &cfg).unwrap();
        assert_eq!(m1.params, m2.params);
        let l1: Vec<u64> = log1.steps.iter().map(|s| s.loss.to_bits()).collect();
        let l2: Vec<u64> = log2.steps.iter().map(|s| s.loss.to_bits()).collect();
        assert_eq!(l1, l2);
    }

    #[test]
    fn loss_trends_down_over_training() {
        let pairs = pairs_fixture();
        let cfg = TrainConfig {
            epochs: 150,
            batch_size: 4,
            learning_rate: 3e-3,
            seed: 1,
            ..TrainConfig::default()
        };
        let (_, log) = train(model_for(&pairs), &pairs, &cfg).unwrap();
        let first = log.epochs.first().unwrap().mean_loss;
        let last = log.epochs.last().unwrap().mean_loss;
        assert!(last < first * 0.5, "expected clear descent: {first} → {last}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_lr = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad_lr.validate().is_err());
        let bad_warmup = TrainConfig {
            warmup_ratio: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad_warmup.validate().is_err());
        let bad_weights = TrainConfig {
            loss_weights: LossWeights {
                fwd: -1.0,
                ..LossWeights::default()
            },
            ..TrainConfig::default()
        };
        assert!(bad_weights.validate().is_err());
    }

    #[test]
    fn m_schedule_default_follows_the_low_resource_trend() {
        let schedule = MSchedule::default();
        assert_eq!(schedule.m_for(0.05), 2);
        assert_eq!(schedule.m_for(0.10), 1);
        assert_eq!(schedule.m_for(0.20), 1);
        assert_eq!(schedule.m_for(0.50), 0);
        assert_eq!(schedule.m_for(1.0), 0);
    }

    #[test]
    fn ablation_flags_zero_the_right_weights() {
        let mut cfg = TrainConfig::default();
        cfg.ablation.enable_du_dl = false;
        let w = cfg.effective_weights();
        assert_eq!((w.fwd, w.b2c, w.r2c), (1.0, 0.0, 1.0));
        cfg.ablation.enable_ru_dl = false;
        let w = cfg.effective_weights();
        assert_eq!((w.fwd, w.b2c, w.r2c), (1.0, 0.0, 0.0));
        cfg.ablation.enable_para = false;
        assert_eq!(cfg.m_for(0.05), 0);
    }

    #[test]
    fn parameter_sharing_couples_the_directions() {
        // One step on a single direction changes the loss on the others.
        let pairs = pairs_fixture();
        let model = model_for(&pairs);
        let by_dir = |d: Direction| -> Vec<&TrainingPair> {
            pairs.iter().filter(|p| p.direction == d).collect()
        };
        let b2c_batch = Batch::from_pairs(&by_dir(Direction::B2c), &model.vocab, 128, 128);
        let before = model.nll(&b2c_batch).unwrap();

        let fwd_only: Vec<TrainingPair> =
            pairs.iter().filter(|p| p.direction == Direction::Fwd).cloned().collect();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            learning_rate: 3e-3,
            loss_weights: LossWeights::forward_only(),
            ..TrainConfig::default()
        };
        let (trained, _) = train(model, &fwd_only, &cfg).unwrap();
        let after = trained.nll(&b2c_batch).unwrap();
        assert_ne!(
            before.to_bits(),
            after.to_bits(),
            "shared parameters must couple directions"
        );
    }
}
