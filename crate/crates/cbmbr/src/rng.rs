//! Deterministic randomness.
//!
//! Every random draw in the crate flows through a [`RngHandle`], a seed for
//! the ChaCha8 stream cipher PRNG. ChaCha has a published reference
//! implementation and produces identical draw sequences on every platform,
//! so any result that depends only on (inputs, seed) is reproducible
//! bit-for-bit. There is no global RNG state.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed wrapper; [`RngHandle::stream`] opens a fresh deterministic stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngHandle {
    seed: u64,
}

impl RngHandle {
    /// Name of the fixed PRNG backing every stream.
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh stream seeded from this handle. Two calls yield identical
    /// streams.
    pub fn stream(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Derives an independent handle for a sub-task, e.g. one trial of a
    /// sweep. SplitMix-style mixing keeps nearby tags decorrelated.
    pub fn derive(&self, tag: u64) -> RngHandle {
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngHandle::new(z ^ (z >> 31))
    }
}

/// Index drawn from the multinomial distribution given by `weights`,
/// walking the cumulative sum in ascending index order so the mapping from
/// stream to index is fixed.
///
/// Returns `None` when the weights are degenerate (non-positive total), in
/// which case callers fall back to uniform sampling.
pub(crate) fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = Some(i);
        }
        acc += w;
        if r < acc && w > 0.0 {
            return Some(i);
        }
    }
    // r landed on the rounding slack past the last bucket.
    last_positive
}

pub(crate) fn uniform_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.random_range(0..n)
}
