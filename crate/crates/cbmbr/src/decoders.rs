//! Selection rules: vanilla quadratic-time MBR, the centroid approximation
//! (uniform and count-weighted), the linear-time mean-aggregate path, and a
//! reference-given oracle selector.
//!
//! Vanilla scores every hypothesis against every pseudo-reference, `O(N^2)`
//! pairs. The centroid variants first cluster the pseudo-references into
//! `k` clusters and score hypotheses against `k` representatives, `O(Nk)`
//! pairs. Phase timings separate the clustering phase from the utility
//! phase (scoring + expectation + argmax) so the two costs can be compared
//! directly.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::clustering::{count_consistent_means, run_kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::math::mean_rows_f32;
use crate::rng::RngHandle;
use crate::types::{phases, CandidateInstance, DecodeResult, Variant};
use crate::utility::{ScoreMatrix, UtilityFn};

/// Which rule to run and with what clustering / utility.
#[derive(Debug, Clone)]
pub struct DecoderConfig {
    pub variant: Variant,
    /// Ignored by `Vanilla` and `MeanAggregate`.
    pub kmeans: KMeansConfig,
    pub utility: UtilityFn,
}

impl DecoderConfig {
    pub fn new(variant: Variant, kmeans: KMeansConfig, utility: UtilityFn) -> Self {
        Self {
            variant,
            kmeans,
            utility,
        }
    }
}

/// Dispatches to the rule selected by `cfg.variant`.
pub fn decode(
    inst: &CandidateInstance,
    cfg: &DecoderConfig,
    rng: &RngHandle,
) -> Result<DecodeResult> {
    match cfg.variant {
        Variant::Vanilla => vanilla_mbr(inst, &cfg.utility),
        Variant::Cbmbr => cbmbr(inst, cfg, rng),
        Variant::CbmbrCnt => cbmbr_cnt(inst, cfg, rng),
        Variant::MeanAggregate => mean_aggregate(inst, &cfg.utility),
        Variant::Oracle => Err(Error::InvalidConfig(
            "oracle selection needs a gold reference; call oracle_select".to_string(),
        )),
    }
}

fn mean_per_row(scores: &ScoreMatrix) -> Vec<f64> {
    let n = scores.col_count() as f64;
    scores
        .rows()
        .map(|row| row.iter().sum::<f64>() / n)
        .collect()
}

/// Sample-approximated MBR: expected utility of hypothesis `i` is the mean
/// score against all pseudo-references.
pub fn vanilla_mbr(inst: &CandidateInstance, utility: &UtilityFn) -> Result<DecodeResult> {
    inst.validate()?;
    let started = Instant::now();
    let scores = utility.score_matrix(inst.source(), inst.hypotheses(), inst.pseudo_refs())?;
    let expected = mean_per_row(&scores);
    let mut timings = BTreeMap::new();
    timings.insert(phases::UTILITY.to_string(), elapsed_ns(started));
    DecodeResult::from_utilities(Variant::Vanilla, expected, timings)
}

/// Centroid-based MBR: cluster the pseudo-references, then average the
/// scores against the `k` centroids with uniform weight.
pub fn cbmbr(
    inst: &CandidateInstance,
    cfg: &DecoderConfig,
    rng: &RngHandle,
) -> Result<DecodeResult> {
    inst.validate()?;
    let kmeans_started = Instant::now();
    let clustering = run_kmeans(inst.pseudo_refs(), &cfg.kmeans, rng)?;
    let kmeans_ns = elapsed_ns(kmeans_started);

    let utility_started = Instant::now();
    let scores =
        cfg.utility
            .score_matrix(inst.source(), inst.hypotheses(), &clustering.centroids)?;
    let expected = mean_per_row(&scores);
    let mut timings = BTreeMap::new();
    timings.insert(phases::KMEANS.to_string(), kmeans_ns);
    timings.insert(phases::UTILITY.to_string(), elapsed_ns(utility_started));
    DecodeResult::from_utilities(Variant::Cbmbr, expected, timings)
}

/// Count-weighted centroid MBR: each cluster's score is weighted by the
/// share of pseudo-references assigned to it.
///
/// Scoring targets the f64 means of the final clusters rather than the
/// stored f32 centroids. Those means are consistent with the counts by
/// construction, which makes the rule reproduce vanilla MBR exactly
/// whenever the utility is affine in the reference, at any `k`.
pub fn cbmbr_cnt(
    inst: &CandidateInstance,
    cfg: &DecoderConfig,
    rng: &RngHandle,
) -> Result<DecodeResult> {
    inst.validate()?;
    let refs = inst.pseudo_refs();
    let kmeans_started = Instant::now();
    let clustering = run_kmeans(refs, &cfg.kmeans, rng)?;
    let means = count_consistent_means(refs, &clustering);
    let kmeans_ns = elapsed_ns(kmeans_started);

    let utility_started = Instant::now();
    // Empty clusters have weight zero; skip them.
    let occupied: Vec<usize> = (0..clustering.k)
        .filter(|&j| clustering.counts[j] > 0)
        .collect();
    let occupied_means: Vec<Vec<f64>> = occupied.iter().map(|&j| means[j].clone()).collect();
    let scores =
        cfg.utility
            .score_matrix_ref64(inst.source(), inst.hypotheses(), &occupied_means)?;
    let n_refs = refs.rows() as f64;
    let expected: Vec<f64> = scores
        .rows()
        .map(|row| {
            row.iter()
                .zip(&occupied)
                .map(|(s, &j)| s * clustering.counts[j] as f64)
                .sum::<f64>()
                / n_refs
        })
        .collect();
    let mut timings = BTreeMap::new();
    timings.insert(phases::KMEANS.to_string(), kmeans_ns);
    timings.insert(phases::UTILITY.to_string(), elapsed_ns(utility_started));
    DecodeResult::from_utilities(Variant::CbmbrCnt, expected, timings)
}

/// Linear-time path: score every hypothesis against the plain mean of the
/// pseudo-reference vectors, no clustering involved. Equivalent to the
/// centroid rule at `k = 1`.
pub fn mean_aggregate(inst: &CandidateInstance, utility: &UtilityFn) -> Result<DecodeResult> {
    inst.validate()?;
    let refs = inst.pseudo_refs();
    let aggregate_started = Instant::now();
    let indices: Vec<usize> = (0..refs.rows()).collect();
    let mean = mean_rows_f32(refs, &indices);
    let aggregate_ns = elapsed_ns(aggregate_started);

    let utility_started = Instant::now();
    let expected: Vec<f64> = inst
        .hypotheses()
        .iter_rows()
        .map(|h| utility.score(inst.source(), h, &mean))
        .collect::<Result<_>>()?;
    let mut timings = BTreeMap::new();
    timings.insert(phases::AGGREGATE.to_string(), aggregate_ns);
    timings.insert(phases::UTILITY.to_string(), elapsed_ns(utility_started));
    DecodeResult::from_utilities(Variant::MeanAggregate, expected, timings)
}

/// Upper-bound selector: scores every hypothesis against a single gold
/// reference vector.
pub fn oracle_select(
    inst: &CandidateInstance,
    utility: &UtilityFn,
    gold_ref: &[f32],
) -> Result<DecodeResult> {
    inst.validate()?;
    if gold_ref.len() != inst.source().len() {
        return Err(Error::DimensionMismatch {
            context: "gold reference vs source dims",
            expected: inst.source().len(),
            actual: gold_ref.len(),
        });
    }
    let started = Instant::now();
    let expected: Vec<f64> = inst
        .hypotheses()
        .iter_rows()
        .map(|h| utility.score(inst.source(), h, gold_ref))
        .collect::<Result<_>>()?;
    let mut timings = BTreeMap::new();
    timings.insert(phases::UTILITY.to_string(), elapsed_ns(started));
    DecodeResult::from_utilities(Variant::Oracle, expected, timings)
}

fn elapsed_ns(started: Instant) -> u64 {
    started.elapsed().as_nanos() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::InitMethod;
    use crate::types::EmbeddingMatrix;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    fn shared_instance(src: &[f32], rows: &[&[f32]]) -> CandidateInstance {
        CandidateInstance::shared(src.to_vec(), matrix(rows)).unwrap()
    }

    #[test]
    fn vanilla_single_hypothesis_selects_it() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 2.0]]);
        let r = vanilla_mbr(&inst, &UtilityFn::dot_linear()).unwrap();
        assert_eq!(r.selected_index, 0);
        assert_eq!(r.expected_utilities.len(), 1);
    }

    #[test]
    fn vanilla_dot_linear_three_by_three() {
        // Full 3x3 brute force: with src = 0 the score is h.y, so the
        // expected utility of h_i is the mean over j of h_i . y_j. The
        // oracle loop below works from the same f32-stored coordinates.
        let rows: [&[f32]; 3] = [&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1]];
        let inst = shared_instance(&[0.0, 0.0], &rows);
        let r = vanilla_mbr(&inst, &UtilityFn::dot_linear()).unwrap();
        for (i, h) in rows.iter().enumerate() {
            let mut want = 0.0f64;
            for y in &rows {
                want += h[0] as f64 * y[0] as f64 + h[1] as f64 * y[1] as f64;
            }
            want /= 3.0;
            assert!(
                (r.expected_utilities[i] - want).abs() < 1e-12,
                "utility {i}: {} vs {want}",
                r.expected_utilities[i]
            );
        }
        // h0 . mean ~ 0.633 beats h1 (~0.367) and h2 (~0.607).
        assert_eq!(r.selected_index, 0);
    }

    #[test]
    fn vanilla_rbf_picks_hypothesis_equal_to_all_refs() {
        let hyps = matrix(&[&[5.0, 0.0], &[0.0, 5.0], &[1.0, 1.0]]);
        let refs = matrix(&[&[0.0, 5.0], &[0.0, 5.0], &[0.0, 5.0]]);
        let inst = CandidateInstance::with_refs(vec![0.0, 0.0], hyps, refs).unwrap();
        let r = vanilla_mbr(&inst, &UtilityFn::rbf(1.0)).unwrap();
        assert_eq!(r.selected_index, 1);
        assert_eq!(r.expected_utilities[1], 1.0);
    }

    #[test]
    fn vanilla_records_utility_phase() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = vanilla_mbr(&inst, &UtilityFn::dot_linear()).unwrap();
        assert!(r.phase_timings.contains_key(phases::UTILITY));
        assert!(!r.phase_timings.contains_key(phases::KMEANS));
    }

    #[test]
    fn cbmbr_k_equals_refs_matches_vanilla_on_distinct_points() {
        let rows: [&[f32]; 4] = [&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1], &[-0.5, 0.4]];
        let inst = shared_instance(&[0.2, -0.1], &rows);
        let utility = UtilityFn::dot_linear();
        let vanilla = vanilla_mbr(&inst, &utility).unwrap();
        let cfg = DecoderConfig::new(Variant::Cbmbr, KMeansConfig::new(4), utility);
        let approx = cbmbr(&inst, &cfg, &RngHandle::new(9)).unwrap();
        assert_eq!(approx.selected_index, vanilla.selected_index);
        for (a, v) in approx
            .expected_utilities
            .iter()
            .zip(&vanilla.expected_utilities)
        {
            assert!((a - v).abs() <= 1e-9 * v.abs().max(1.0), "{a} vs {v}");
        }
    }

    #[test]
    fn cbmbr_k1_matches_mean_aggregate_bitwise() {
        let rows: [&[f32]; 5] = [
            &[1.0, 0.25],
            &[0.125, 1.0],
            &[0.75, 0.1],
            &[-0.5, 0.375],
            &[0.0625, -1.0],
        ];
        let inst = shared_instance(&[0.5, -0.25], &rows);
        for utility in [UtilityFn::dot_linear(), UtilityFn::rbf(0.7), UtilityFn::mlp(2)] {
            let cfg = DecoderConfig::new(Variant::Cbmbr, KMeansConfig::new(1), utility.clone());
            for seed in [0u64, 1, 99] {
                let a = cbmbr(&inst, &cfg, &RngHandle::new(seed)).unwrap();
                let b = mean_aggregate(&inst, &utility).unwrap();
                assert_eq!(a.expected_utilities, b.expected_utilities, "{}", utility.name());
                assert_eq!(a.selected_index, b.selected_index);
            }
        }
    }

    #[test]
    fn cbmbr_k1_mlp_is_finite_with_valid_index() {
        let rows: [&[f32]; 4] = [&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5], &[-1.0, 0.2]];
        let inst = shared_instance(&[0.1, 0.1], &rows);
        let cfg = DecoderConfig::new(Variant::Cbmbr, KMeansConfig::new(1), UtilityFn::mlp(5));
        let r = cbmbr(&inst, &cfg, &RngHandle::new(0)).unwrap();
        assert!(r.selected_index < 4);
        assert!(r.expected_utilities.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cbmbr_rejects_k_above_ref_count() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let cfg = DecoderConfig::new(Variant::Cbmbr, KMeansConfig::new(5), UtilityFn::dot_linear());
        let err = cbmbr(&inst, &cfg, &RngHandle::new(0)).unwrap_err();
        assert!(matches!(err, Error::KTooLarge { k: 5, n: 2 }), "{err}");
    }

    #[test]
    fn cbmbr_cnt_hand_computed_two_cluster_case() {
        // Two well-separated integer blobs: {(0,0),(2,0),(4,0)} and
        // {(100,0)}. One Lloyd round converges, so the counted clusters
        // are exactly those blobs with means (2,0) and (100,0), weights
        // 3/4 and 1/4. Under dot with src=(1,0):
        //   s(h, c) = h.c + src.c
        let hyps = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let refs = matrix(&[&[0.0, 0.0], &[2.0, 0.0], &[4.0, 0.0], &[100.0, 0.0]]);
        let inst = CandidateInstance::with_refs(vec![1.0, 0.0], hyps, refs).unwrap();
        let cfg = DecoderConfig::new(
            Variant::CbmbrCnt,
            KMeansConfig::new(2),
            UtilityFn::dot_linear(),
        );
        let r = cbmbr_cnt(&inst, &cfg, &RngHandle::new(1)).unwrap();
        // h0: 0.75*(1*2 + 1*2) + 0.25*(1*100 + 1*100) = 3 + 50 = 53
        // h1: 0.75*(0 + 2)      + 0.25*(0 + 100)       = 1.5 + 25 = 26.5
        assert!((r.expected_utilities[0] - 53.0).abs() < 1e-9);
        assert!((r.expected_utilities[1] - 26.5).abs() < 1e-9);
        assert_eq!(r.selected_index, 0);
    }

    #[test]
    fn cbmbr_cnt_equal_cluster_sizes_matches_cbmbr_selection() {
        // Two stable equal-size blobs; uniform weights make the weighted
        // and unweighted objectives coincide.
        let rows: [&[f32]; 4] = [&[0.0, 0.0], &[1.0, 0.0], &[100.0, 0.0], &[101.0, 0.0]];
        let inst = shared_instance(&[0.0, 1.0], &rows);
        for utility in [UtilityFn::dot_linear(), UtilityFn::rbf(0.05)] {
            let cfg = DecoderConfig::new(Variant::Cbmbr, KMeansConfig::new(2), utility.clone());
            let plain = cbmbr(&inst, &cfg, &RngHandle::new(4)).unwrap();
            let cfg_cnt = DecoderConfig { variant: Variant::CbmbrCnt, ..cfg };
            let weighted = cbmbr_cnt(&inst, &cfg_cnt, &RngHandle::new(4)).unwrap();
            assert_eq!(plain.selected_index, weighted.selected_index, "{}", utility.name());
        }
    }

    #[test]
    fn cbmbr_cnt_weights_derive_from_counts_summing_to_refs() {
        let rows: [&[f32]; 6] = [
            &[0.0, 0.0],
            &[0.1, 0.0],
            &[0.0, 0.1],
            &[50.0, 0.0],
            &[50.1, 0.0],
            &[25.0, 25.0],
        ];
        let inst = shared_instance(&[0.0, 0.0], &rows);
        let clustering = run_kmeans(
            inst.pseudo_refs(),
            &KMeansConfig::new(3),
            &RngHandle::new(2),
        )
        .unwrap();
        assert_eq!(clustering.counts.iter().sum::<usize>(), 6);
    }

    #[test]
    fn mean_aggregate_symmetric_refs_all_zero_utilities() {
        let rows: [&[f32]; 4] = [&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]];
        let inst = shared_instance(&[0.0, 0.0], &rows);
        let r = mean_aggregate(&inst, &UtilityFn::dot_linear()).unwrap();
        assert!(r.expected_utilities.iter().all(|&v| v == 0.0));
        assert_eq!(r.selected_index, 0);
    }

    #[test]
    fn oracle_gold_equal_to_first_hypothesis_under_rbf() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 2.0], &[3.0, 4.0]]);
        let r = oracle_select(&inst, &UtilityFn::rbf(1.0), &[1.0, 2.0]).unwrap();
        assert_eq!(r.selected_index, 0);
        assert_eq!(r.expected_utilities[0], 1.0);
    }

    #[test]
    fn oracle_single_hypothesis() {
        let inst = shared_instance(&[0.0], &[&[2.0]]);
        let r = oracle_select(&inst, &UtilityFn::dot_linear(), &[1.0]).unwrap();
        assert_eq!(r.selected_index, 0);
    }

    #[test]
    fn oracle_dot_prefers_aligned_hypothesis() {
        let inst = shared_instance(&[0.0, 0.0], &[&[2.0, 0.0], &[0.0, 2.0]]);
        let r = oracle_select(&inst, &UtilityFn::dot_linear(), &[1.0, 0.0]).unwrap();
        assert_eq!(r.selected_index, 0);
        assert_eq!(r.expected_utilities, vec![2.0, 0.0]);
    }

    #[test]
    fn oracle_rejects_mismatched_gold_dims() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 0.0]]);
        let err = oracle_select(&inst, &UtilityFn::dot_linear(), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn decode_dispatches_by_variant() {
        let inst = shared_instance(&[0.0, 0.0], &[&[1.0, 0.0], &[0.5, 0.5], &[0.0, 1.0]]);
        let rng = RngHandle::new(0);
        for variant in [
            Variant::Vanilla,
            Variant::Cbmbr,
            Variant::CbmbrCnt,
            Variant::MeanAggregate,
        ] {
            let cfg = DecoderConfig::new(
                variant,
                KMeansConfig::new(2).with_init(InitMethod::KMeansPlusPlus),
                UtilityFn::dot_linear(),
            );
            let r = decode(&inst, &cfg, &rng).unwrap();
            assert_eq!(r.variant, variant);
            assert_eq!(r.expected_utilities.len(), 3);
        }
    }
}
