//! Low-resource subsampling: whole dialogues, uniform without replacement.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{CorpusError, DialogueCorpus};

/// Selects `⌈fraction · N⌉` whole dialogues uniformly without replacement.
///
/// Selection depends only on the sorted dialogue ids and the seed, so
/// reordering the corpus does not change which dialogues are chosen. The
/// returned corpus preserves the input order of the selected dialogues.
pub fn subsample(
    corpus: &DialogueCorpus,
    fraction: f64,
    seed: u64,
) -> Result<DialogueCorpus, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::FractionOutOfRange(fraction));
    }
    let n = corpus.len();
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    if k == n {
        return Ok(corpus.clone());
    }

    let mut ids: Vec<&str> = corpus
        .dialogues
        .iter()
        .map(|d| d.dialogue_id.as_str())
        .collect();
    ids.sort_unstable();

    // Partial Fisher-Yates over the sorted id list.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rand::Rng::random_range(&mut rng, 0..(n - i));
        indices.swap(i, j);
    }
    let selected: std::collections::BTreeSet<&str> =
        indices[..k].iter().map(|&i| ids[i]).collect();

    let dialogues = corpus
        .dialogues
        .iter()
        .filter(|d| selected.contains(d.dialogue_id.as_str()))
        .cloned()
        .collect();
    Ok(DialogueCorpus {
        dialogues,
        schema: corpus.schema.clone(),
    })
}
