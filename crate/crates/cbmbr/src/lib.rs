//! Minimum Bayes risk selection over candidate embedding vectors.
//!
//! Given a source embedding and a set of hypothesis embeddings, MBR picks
//! the hypothesis with the highest expected utility against a set of
//! pseudo-reference embeddings (conventionally the hypothesis set itself),
//! which costs `O(N^2)` utility evaluations. The centroid-based
//! approximation clusters the pseudo-references with k-means++ seeded
//! k-means and scores hypotheses against the `k` centroids instead,
//! dropping the cost to `O(Nk)`; a count-weighted variant and a
//! linear-time mean-aggregate path round out the selection rules.
//!
//! Everything downstream of a seed is deterministic: embeddings are `f32`,
//! reductions accumulate in `f64` with fixed order, and the only source of
//! randomness is the ChaCha8 stream opened from an explicit [`RngHandle`].

mod error;
mod math;
mod rng;
mod types;

pub mod bench;
pub mod clustering;
pub mod decoders;
pub mod io;
pub mod synth;
pub mod utility;

pub use error::{Error, Result};
pub use rng::RngHandle;
pub use types::{
    argmax_with_ties, phases, validate_instance, CandidateInstance, DecodeResult,
    EmbeddingMatrix, Variant,
};

use std::sync::atomic::{AtomicUsize, Ordering};

static THREAD_COUNT: AtomicUsize = AtomicUsize::new(1);

/// Sets the worker count used by the point- and row-parallel inner loops
/// (`assign_step`, `score_matrix`). The default of 1 keeps every code path
/// strictly serial. Results are bitwise identical at any thread count
/// because per-row arithmetic order is fixed.
///
/// Values above 1 enable rayon; the effective parallelism is bounded by
/// the installed rayon pool.
pub fn set_thread_count(n: usize) {
    THREAD_COUNT.store(n.max(1), Ordering::Relaxed);
}

pub fn thread_count() -> usize {
    THREAD_COUNT.load(Ordering::Relaxed)
}
