//! Central finite-difference validation of the analytic gradients.

use super::model::{Batch, Seq2SeqModel};
use super::NeuralError;

/// Coordinates checked per block when the model is too large to sweep fully.
const SAMPLED_COORDS_PER_BLOCK: usize = 8;

/// Parameter count below which every coordinate is checked.
const FULL_SWEEP_LIMIT: usize = 10_000;

impl Seq2SeqModel {
    /// Maximum relative error between analytic gradients and central finite
    /// differences over sampled coordinates:
    /// `|analytic − numeric| / (|analytic| + |numeric| + ε)`.
    ///
    /// Models at or under ~10k parameters are swept exhaustively; larger ones
    /// check a strided sample per block. The parameters are restored exactly
    /// after probing.
    pub fn gradient_check(&mut self, batch: &Batch, epsilon: f64) -> Result<f64, NeuralError> {
        if !(epsilon > 0.0) {
            return Err(NeuralError::InvalidEpsilon(epsilon));
        }
        let (_, analytic) = self.grads(batch)?;
        let mut analytic_blocks = Vec::new();
        analytic.for_each_block(&mut |name, data| {
            analytic_blocks.push((name.to_string(), data.to_vec()));
        });

        let full_sweep = self.param_count() <= FULL_SWEEP_LIMIT;
        let mut max_rel_err = 0.0f64;
        for block_index in 0..analytic_blocks.len() {
            let (name, grad) = analytic_blocks[block_index].clone();
            let len = grad.len();
            let coords: Vec<usize> = if full_sweep || len <= SAMPLED_COORDS_PER_BLOCK {
                (0..len).collect()
            } else {
                (0..SAMPLED_COORDS_PER_BLOCK)
                    .map(|i| i * len / SAMPLED_COORDS_PER_BLOCK)
                    .collect()
            };
            for coord in coords {
                let numeric = self.central_difference(batch, &name, coord, epsilon)?;
                let a = grad[coord];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + epsilon);
                max_rel_err = max_rel_err.max(rel);
            }
        }
        Ok(max_rel_err)
    }

    fn central_difference(
        &mut self,
        batch: &Batch,
        block: &str,
        coord: usize,
        epsilon: f64,
    ) -> Result<f64, NeuralError> {
        let original = self.poke(block, coord, |x| x + epsilon);
        let plus = self.nll(batch)?;
        self.poke(block, coord, |_| original - epsilon);
        let minus = self.nll(batch)?;
        self.poke(block, coord, |_| original);
        Ok((plus - minus) / (2.0 * epsilon))
    }

    /// Applies `f` to one coordinate and returns its previous value.
    fn poke(&mut self, block: &str, coord: usize, f: impl Fn(f64) -> f64) -> f64 {
        let mut previous = f64::NAN;
        self.params.for_each_block_mut(&mut |name, data| {
            if name == block {
                previous = data[coord];
                data[coord] = f(previous);
            }
        });
        debug_assert!(!previous.is_nan() || block.is_empty());
        previous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::toks;
    use crate::dualdata::{Direction, TrainingPair};
    use crate::neural::{ModelConfig, Vocab};

    fn check_pairs() -> Vec<TrainingPair> {
        vec![
            TrainingPair {
                direction: Direction::Fwd,
                input: toks("<task:fwd> <usr> aa bb cc"),
                target: toks("<bs> [none] <db> [db_none] <resp> dd ee <eos>"),
                dialogue_id: "d0".into(),
                t: 0,
                j: 0,
            },
            TrainingPair {
                direction: Direction::R2c,
                input: toks("<task:r2c> dd ee"),
                target: toks("aa bb cc <eos>"),
                dialogue_id: "d0".into(),
                t: 0,
                j: 0,
            },
        ]
    }

    fn model_with(config: ModelConfig) -> (Seq2SeqModel, Batch) {
        let pairs = check_pairs();
        let vocab = Vocab::build(&pairs, 1).unwrap();
        let refs: Vec<&TrainingPair> = pairs.iter().collect();
        let batch = Batch::from_pairs(&refs, &vocab, config.max_src_len, config.max_tgt_len);
        (Seq2SeqModel::new(config, vocab).unwrap(), batch)
    }

    #[test]
    fn linear_sanity_model_matches_finite_differences_tightly() {
        let (mut model, batch) = model_with(ModelConfig::linear_sanity());
        assert!(model.param_count() <= 10_000);
        let err = model.gradient_check(&batch, 3e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn sanity_model_matches_finite_differences() {
        let (mut model, batch) = model_with(ModelConfig::sanity());
        assert!(model.param_count() <= 10_000, "sanity model must stay under the full-sweep limit");
        let err = model.gradient_check(&batch, 3e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let (mut model, batch) = model_with(ModelConfig::linear_sanity());
        assert!(matches!(
            model.gradient_check(&batch, 0.0),
            Err(NeuralError::InvalidEpsilon(_))
        ));
        assert!(matches!(
            model.gradient_check(&batch, -1e-5),
            Err(NeuralError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn parameters_are_restored_after_checking() {
        let (mut model, batch) = model_with(ModelConfig::linear_sanity());
        let before = model.params.clone();
        model.gradient_check(&batch, 3e-5).unwrap();
        assert_eq!(model.params, before);
    }
}
