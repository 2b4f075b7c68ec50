use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::synthetic::{histogram, AnswerHistogram, Answered};

/// A few-shot subset with its answer histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShot<S> {
    pub samples: Vec<S>,
    pub histogram: AnswerHistogram,
}

/// Uniform sample of `k` items without replacement, in random order.
pub fn sample_few_shot<S: Clone + Answered>(
    dataset: &[S],
    k: usize,
    seed: u64,
) -> Result<FewShot<S>> {
    if k > dataset.len() {
        return Err(Error::InfeasibleShots {
            k,
            size: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, k);
    let samples: Vec<S> = chosen.iter().map(|&i| dataset[i].clone()).collect();
    let histogram = histogram(&samples);
    Ok(FewShot { samples, histogram })
}
