//! k-means++ initialization and Lloyd-style k-means over pseudo-reference
//! vectors.
//!
//! The initializer picks the first centroid uniformly from the points, then
//! draws each subsequent centroid from the multinomial with weights
//! `d^2(p_i) / sum_j d^2(p_j)`, where `d^2` is the squared Euclidean
//! distance to the nearest already-chosen centroid. Lloyd rounds alternate
//! nearest-centroid assignment and per-cluster mean updates; a final assign
//! pass makes the returned assignments consistent with the returned
//! centroids.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot_ff, expanded_sq_dist, row_sq_norms, sq_norm_f};
use crate::rng::{uniform_index, weighted_index, RngHandle};
use crate::types::EmbeddingMatrix;
use crate::thread_count;

/// Centroid initialization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMethod {
    /// Distance-weighted seeding (the default).
    #[serde(rename = "kpp")]
    KMeansPlusPlus,
    /// Uniform sampling without replacement from the points, the ablation
    /// baseline.
    #[serde(rename = "random")]
    RandomFromSamples,
}

/// k-means configuration. The seed is supplied separately through
/// [`RngHandle`], the crate's single randomness source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    /// Number of clusters; `1 <= k <=` point count is checked at run time.
    pub k: usize,
    /// Lloyd iterations after initialization. Default 1; values up to 32
    /// are sensible, more buys nothing at these scales.
    pub niter: usize,
    pub init: InitMethod,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            niter: 1,
            init: InitMethod::KMeansPlusPlus,
        }
    }

    pub fn with_niter(mut self, niter: usize) -> Self {
        self.niter = niter;
        self
    }

    pub fn with_init(mut self, init: InitMethod) -> Self {
        self.init = init;
        self
    }
}

/// Result of clustering: `k` centroids, per-point nearest-centroid
/// assignments, and per-cluster point counts.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub centroids: EmbeddingMatrix,
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
    pub k: usize,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::EmptySet("cluster count k"));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    Ok(())
}

/// Squared distance from every point to its nearest row of `centroids`,
/// computed in ascending point order. Normalizing this vector gives the
/// selection weights of the next k-means++ pick.
pub fn min_sq_distances(points: &EmbeddingMatrix, centroids: &EmbeddingMatrix) -> Vec<f64> {
    let c_norms = row_sq_norms(centroids);
    points
        .iter_rows()
        .map(|p| {
            let p_norm = sq_norm_f(p);
            centroids
                .iter_rows()
                .zip(&c_norms)
                .map(|(c, &cn)| expanded_sq_dist(p_norm, cn, dot_ff(p, c)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// k-means++ initial centroid selection.
///
/// Returns `k` rows copied from `points`. If every remaining point
/// coincides with an already-chosen centroid (all weights zero), the next
/// centroid falls back to a uniform draw among all points.
pub fn kmeanspp_init(
    points: &EmbeddingMatrix,
    k: usize,
    rng: &RngHandle,
) -> Result<EmbeddingMatrix> {
    check_k(k, points.rows())?;
    let mut stream = rng.stream();
    let n = points.rows();
    let dims = points.dims();

    let mut data = Vec::with_capacity(k * dims);
    let first = uniform_index(&mut stream, n);
    data.extend_from_slice(points.row(first));

    // Running min squared distance to the chosen set, updated after each
    // pick so the whole init costs O(nk).
    let mut d2 = vec![f64::INFINITY; n];
    let mut last = first;
    for _ in 1..k {
        let c = points.row(last);
        let c_norm = sq_norm_f(c);
        for (i, dist) in d2.iter_mut().enumerate() {
            let p = points.row(i);
            let d = expanded_sq_dist(sq_norm_f(p), c_norm, dot_ff(p, c));
            if d < *dist {
                *dist = d;
            }
        }
        let picked = match weighted_index(&mut stream, &d2) {
            Some(i) => i,
            // All points coincide with chosen centroids; sample uniformly.
            None => uniform_index(&mut stream, n),
        };
        data.extend_from_slice(points.row(picked));
        last = picked;
    }
    EmbeddingMatrix::new(data, k, dims)
}

/// Uniform sampling of `k` distinct point indices as initial centroids.
fn random_init(points: &EmbeddingMatrix, k: usize, rng: &RngHandle) -> Result<EmbeddingMatrix> {
    check_k(k, points.rows())?;
    let mut stream = rng.stream();
    let mut data = Vec::with_capacity(k * points.dims());
    for i in sample(&mut stream, points.rows(), k) {
        data.extend_from_slice(points.row(i));
    }
    EmbeddingMatrix::new(data, k, points.dims())
}

/// Nearest-centroid assignment under squared Euclidean distance, ties to
/// the lowest centroid index.
///
/// May run point-parallel; each point's search order over centroids is
/// fixed, so the output does not depend on the thread count.
pub fn assign_step(
    points: &EmbeddingMatrix,
    centroids: &EmbeddingMatrix,
) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::EmptySet("centroids"));
    }
    if points.dims() != centroids.dims() {
        return Err(Error::DimensionMismatch {
            context: "assign_step points vs centroids dims",
            expected: points.dims(),
            actual: centroids.dims(),
        });
    }
    let c_norms = row_sq_norms(centroids);
    let nearest = |p: &[f32]| -> usize {
        let p_norm = sq_norm_f(p);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, (c, &cn)) in centroids.iter_rows().zip(&c_norms).enumerate() {
            let d = expanded_sq_dist(p_norm, cn, dot_ff(p, c));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    };

    let mut out = vec![0usize; points.rows()];
    if thread_count() > 1 && points.rows() > 1 {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| {
            *slot = nearest(points.row(i));
        });
    } else {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = nearest(points.row(i));
        }
    }
    Ok(out)
}

/// Per-cluster arithmetic mean. Empty clusters keep their previous
/// centroid unchanged. Accumulation over points is in f64, ascending point
/// index.
pub fn update_step(
    points: &EmbeddingMatrix,
    assignments: &[usize],
    k: usize,
    prev_centroids: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    if assignments.len() != points.rows() {
        return Err(Error::DimensionMismatch {
            context: "update_step assignments length",
            expected: points.rows(),
            actual: assignments.len(),
        });
    }
    if prev_centroids.rows() != k || prev_centroids.dims() != points.dims() {
        return Err(Error::DimensionMismatch {
            context: "update_step previous centroids shape",
            expected: k * points.dims(),
            actual: prev_centroids.rows() * prev_centroids.dims(),
        });
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::DimensionMismatch {
            context: "update_step assignment index",
            expected: k,
            actual: bad,
        });
    }

    let dims = points.dims();
    let mut acc = vec![0.0f64; k * dims];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        let row = points.row(i);
        let slot = &mut acc[a * dims..(a + 1) * dims];
        for (s, v) in slot.iter_mut().zip(row) {
            *s += *v as f64;
        }
    }

    let mut data = Vec::with_capacity(k * dims);
    for j in 0..k {
        if counts[j] == 0 {
            data.extend_from_slice(prev_centroids.row(j));
        } else {
            let n = counts[j] as f64;
            data.extend(acc[j * dims..(j + 1) * dims].iter().map(|&s| (s / n) as f32));
        }
    }
    EmbeddingMatrix::new(data, k, dims)
}

fn counts_from_assignments(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }
    counts
}

/// Full clustering pass: initialization, exactly `cfg.niter` rounds of
/// (assign, update), then one final assign so the returned assignments and
/// counts are consistent with the returned centroids.
pub fn run_kmeans(
    points: &EmbeddingMatrix,
    cfg: &KMeansConfig,
    rng: &RngHandle,
) -> Result<Clustering> {
    check_k(cfg.k, points.rows())?;
    let mut centroids = match cfg.init {
        InitMethod::KMeansPlusPlus => kmeanspp_init(points, cfg.k, rng)?,
        InitMethod::RandomFromSamples => random_init(points, cfg.k, rng)?,
    };
    for _ in 0..cfg.niter {
        let assignments = assign_step(points, &centroids)?;
        centroids = update_step(points, &assignments, cfg.k, &centroids)?;
    }
    let assignments = assign_step(points, &centroids)?;
    let counts = counts_from_assignments(&assignments, cfg.k);
    Ok(Clustering {
        centroids,
        assignments,
        counts,
        k: cfg.k,
    })
}

/// Per-cluster arithmetic means of the rows selected by `clustering`'s
/// final assignments, kept in f64. Empty clusters fall back to the stored
/// centroid.
///
/// Unlike [`Clustering::centroids`], which come from the *previous* Lloyd
/// round's partition, these means are consistent with the returned counts:
/// `sum_j counts[j] * mean[j] == sum_i points[i]` holds exactly. The
/// count-weighted selection rule relies on that identity.
pub fn count_consistent_means(
    points: &EmbeddingMatrix,
    clustering: &Clustering,
) -> Vec<Vec<f64>> {
    let dims = points.dims();
    let k = clustering.k;
    let mut acc = vec![0.0f64; k * dims];
    for (i, &a) in clustering.assignments.iter().enumerate() {
        let slot = &mut acc[a * dims..(a + 1) * dims];
        for (s, v) in slot.iter_mut().zip(points.row(i)) {
            *s += *v as f64;
        }
    }
    (0..k)
        .map(|j| {
            if clustering.counts[j] == 0 {
                clustering.centroids.row(j).iter().map(|&v| v as f64).collect()
            } else {
                let n = clustering.counts[j] as f64;
                acc[j * dims..(j + 1) * dims].iter().map(|&s| s / n).collect()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kpp_two_points_picks_both() {
        let points = matrix(&[&[0.0, 0.0], &[10.0, 0.0]]);
        for seed in 0..32 {
            let c = kmeanspp_init(&points, 2, &RngHandle::new(seed)).unwrap();
            let mut rows: Vec<Vec<f32>> = c.iter_rows().map(|r| r.to_vec()).collect();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(rows, vec![vec![0.0, 0.0], vec![10.0, 0.0]], "seed {seed}");
        }
    }

    #[test]
    fn kpp_coincident_points_fall_back_to_uniform() {
        let points = matrix(&[&[1.0f32, 1.0][..]; 4]);
        let c = kmeanspp_init(&points, 2, &RngHandle::new(3)).unwrap();
        assert_eq!(c.rows(), 2);
        for row in c.iter_rows() {
            assert_eq!(row, &[1.0, 1.0]);
        }
    }

    #[test]
    fn kpp_rejects_k_above_point_count() {
        let points = matrix(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let err = kmeanspp_init(&points, 3, &RngHandle::new(0)).unwrap_err();
        assert!(matches!(err, Error::KTooLarge { k: 3, n: 2 }), "{err}");
    }

    #[test]
    fn kpp_is_bitwise_deterministic() {
        let points = matrix(&[&[0.0, 0.0], &[1.0, 2.0], &[4.0, -1.0], &[2.0, 2.0]]);
        let h = RngHandle::new(1234);
        let a = kmeanspp_init(&points, 3, &h).unwrap();
        let b = kmeanspp_init(&points, 3, &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn second_pick_weights_match_squared_distances() {
        // d^2 to the pinned first centroid (0,0) is {0, 1, 16}; the
        // second pick must follow [0, 1/17, 16/17]. Distances here are
        // integer-exact, so the weights are exact as well.
        let points = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[4.0, 0.0]]);
        let pinned = matrix(&[&[0.0, 0.0]]);
        let d2 = min_sq_distances(&points, &pinned);
        assert_eq!(d2, vec![0.0, 1.0, 16.0]);
    }

    #[test]
    fn assign_single_centroid_maps_everything_to_zero() {
        let points = matrix(&[&[0.0, 0.0], &[5.0, 5.0], &[-3.0, 2.0]]);
        let centroids = matrix(&[&[1.0, 1.0]]);
        assert_eq!(assign_step(&points, &centroids).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn assign_two_centroids_brute_force_case() {
        let points = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[9.0, 0.0], &[10.0, 0.0]]);
        let centroids = matrix(&[&[0.5, 0.0], &[9.5, 0.0]]);
        assert_eq!(
            assign_step(&points, &centroids).unwrap(),
            vec![0, 0, 1, 1]
        );
    }

    #[test]
    fn assign_tie_goes_to_lowest_centroid_index() {
        let points = matrix(&[&[5.0, 0.0]]);
        let centroids = matrix(&[&[0.0, 0.0], &[10.0, 0.0]]);
        assert_eq!(assign_step(&points, &centroids).unwrap(), vec![0]);
    }

    #[test]
    fn assign_dimension_mismatch() {
        let points = matrix(&[&[0.0, 0.0]]);
        let centroids = matrix(&[&[0.0, 0.0, 0.0]]);
        assert!(matches!(
            assign_step(&points, &centroids).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn update_single_cluster_mean() {
        let points = matrix(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let prev = matrix(&[&[9.0, 9.0]]);
        let c = update_step(&points, &[0, 0], 1, &prev).unwrap();
        assert_eq!(c.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn update_two_cluster_means() {
        let points = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[9.0, 0.0], &[10.0, 0.0]]);
        let prev = matrix(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let c = update_step(&points, &[0, 0, 1, 1], 2, &prev).unwrap();
        assert_eq!(c.row(0), &[0.5, 0.0]);
        assert_eq!(c.row(1), &[9.5, 0.0]);
    }

    #[test]
    fn update_keeps_previous_centroid_for_empty_cluster() {
        let points = matrix(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let prev = matrix(&[&[0.0, 0.0], &[7.0, 7.0]]);
        let c = update_step(&points, &[0, 0], 2, &prev).unwrap();
        assert_eq!(c.row(0), &[1.0, 0.0]);
        assert_eq!(c.row(1), &[7.0, 7.0]);
    }

    #[test]
    fn kmeans_k_equals_n_yields_singletons() {
        let points = matrix(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 5.0], &[-4.0, 1.0]]);
        let c = run_kmeans(&points, &KMeansConfig::new(4), &RngHandle::new(5)).unwrap();
        assert_eq!(c.counts, vec![1, 1, 1, 1]);
        let mut centroid_rows: Vec<Vec<f32>> =
            c.centroids.iter_rows().map(|r| r.to_vec()).collect();
        let mut point_rows: Vec<Vec<f32>> = points.iter_rows().map(|r| r.to_vec()).collect();
        centroid_rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        point_rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(centroid_rows, point_rows);
    }

    #[test]
    fn kmeans_k1_is_global_mean() {
        let points = matrix(&[&[0.0, 0.0], &[1.0, 2.0], &[5.0, 4.0]]);
        for niter in [0usize, 1, 3] {
            let cfg = KMeansConfig::new(1).with_niter(niter);
            let c = run_kmeans(&points, &cfg, &RngHandle::new(11)).unwrap();
            if niter > 0 {
                assert_eq!(c.centroids.row(0), &[2.0, 2.0], "niter {niter}");
            }
            assert_eq!(c.counts, vec![3]);
        }
    }

    #[test]
    fn kmeans_separated_blobs_recover_counts() {
        // Two tight blobs around (0,0) and (100,0); any init that lands in
        // both basins separates them in one round.
        let points = matrix(&[
            &[0.0, 0.0],
            &[0.5, 0.2],
            &[-0.3, 0.4],
            &[100.0, 0.0],
            &[100.4, -0.2],
        ]);
        let c = run_kmeans(&points, &KMeansConfig::new(2), &RngHandle::new(0)).unwrap();
        let mut counts = c.counts.clone();
        counts.sort_unstable();
        assert_eq!(counts, vec![2, 3]);
    }

    #[test]
    fn kmeans_counts_match_assignments() {
        let points = matrix(&[&[0.0, 1.0], &[2.0, 3.0], &[4.0, 5.0], &[6.0, 7.0], &[8.0, 9.0]]);
        let c = run_kmeans(&points, &KMeansConfig::new(3), &RngHandle::new(21)).unwrap();
        for (j, &count) in c.counts.iter().enumerate() {
            let observed = c.assignments.iter().filter(|&&a| a == j).count();
            assert_eq!(count, observed);
        }
        assert_eq!(c.counts.iter().sum::<usize>(), points.rows());
    }

    #[test]
    fn count_consistent_means_decompose_total_sum() {
        let points = matrix(&[&[0.0, 0.0], &[0.9, 0.0], &[3.0, 0.0], &[10.0, 2.0]]);
        let c = run_kmeans(&points, &KMeansConfig::new(2), &RngHandle::new(7)).unwrap();
        let means = count_consistent_means(&points, &c);
        let mut weighted = vec![0.0f64; 2];
        for (j, m) in means.iter().enumerate() {
            for (w, v) in weighted.iter_mut().zip(m) {
                *w += c.counts[j] as f64 * v;
            }
        }
        let total = crate::math::sum_rows_f64(&points, &[0, 1, 2, 3]);
        for (w, t) in weighted.iter().zip(&total) {
            assert!((w - t).abs() < 1e-9, "{w} vs {t}");
        }
    }
}
