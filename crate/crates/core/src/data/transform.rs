use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::risk::{Dataset, Sample};
use crate::{Error, Result};

/// Applies one seeded Fisher–Yates shuffle to the sample order. Every prefix
/// of the result is a prefix of that single order. Seed 0 keeps the current order.
pub fn permute_prefix(data: &Dataset, seed: u64) -> Dataset {
    let mut out = if seed == 0 {
        data.clone()
    } else {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let samples = order.into_iter().map(|i| data.sample(i).to_owned()).collect();
        Dataset::new(samples, data.dim()).expect("permuting a valid dataset")
    };
    out.set_order_seed(seed);
    out
}

/// Scales every sample to unit Euclidean norm, dropping all-zero samples.
/// Returns the normalized dataset and the number of samples dropped.
pub fn normalize_rows(data: &Dataset) -> Result<(Dataset, usize)> {
    let mut dropped = 0;
    let samples: Vec<Sample> = data
        .iter()
        .filter_map(|s| {
            let norm = s.sq_norm().sqrt();
            if norm == 0.0 {
                dropped += 1;
                return None;
            }
            let mut owned = s.to_owned();
            owned.values.iter_mut().for_each(|v| *v /= norm);
            Some(owned)
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::validation("every sample has an all-zero feature vector"));
    }
    let mut out = Dataset::new(samples, data.dim())?;
    out.set_order_seed(data.order_seed());
    Ok((out, dropped))
}
