//! Balanced evaluation subset: every positive plus a fixed number of seeded
//! negatives per review.
//!
//! Sampling uses ChaCha8 (`rand_chacha`), seeded with `seed_from_u64(seed)`,
//! drawn once per review in ascending `review_id` order. Each review's
//! negatives are chosen by a partial Fisher-Yates shuffle over their input
//! positions; bounded integers are drawn by rejection from `next_u64` so the
//! selection does not depend on `rand`'s range-sampling internals.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, GroundTruth, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetSpec {
    pub seed: u64,
    pub excludes_per_review: usize,
    pub include_all_positives: bool,
}

impl Default for SubsetSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            excludes_per_review: 23,
            include_all_positives: true,
        }
    }
}

/// Uniform integer in `0..bound` (`bound > 0`).
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let draw = rng.next_u64();
        if draw < zone {
            return draw % bound;
        }
    }
}

/// `count` distinct positions from `0..len`, returned in ascending order.
fn sample_positions(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..len).collect();
    for i in 0..count {
        let j = i + bounded(rng, (len - i) as u64) as usize;
        positions.swap(i, j);
    }
    let mut chosen = positions[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Build the subset from a cleaned, labelled corpus.
///
/// Records carrying a drop reason or no ground-truth label are ignored.
/// Output is grouped by review in ascending `review_id` order; within a
/// review, positives come first, then the sampled negatives, each in input
/// order.
pub fn build_balanced_subset(
    records: &[Record],
    spec: &SubsetSpec,
) -> Result<Vec<Record>, CorpusError> {
    let mut by_review: BTreeMap<&str, (Vec<&Record>, Vec<&Record>)> = BTreeMap::new();
    for record in records.iter().filter(|r| r.is_kept()) {
        let entry = by_review.entry(record.review_id.as_str()).or_default();
        match record.ground_truth {
            GroundTruth::IncludedInReview => entry.0.push(record),
            GroundTruth::ExcludedFromReview => entry.1.push(record),
            GroundTruth::Unlabelled => {}
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut subset = Vec::new();
    for (review_id, (positives, negatives)) in by_review {
        if negatives.len() < spec.excludes_per_review {
            return Err(CorpusError::InsufficientExcludes {
                review_id: review_id.to_string(),
                available: negatives.len(),
                required: spec.excludes_per_review,
            });
        }
        if spec.include_all_positives {
            subset.extend(positives.into_iter().cloned());
        }
        let chosen = sample_positions(&mut rng, negatives.len(), spec.excludes_per_review);
        subset.extend(chosen.into_iter().map(|i| negatives[i].clone()));
    }
    Ok(subset)
}
