//! Pluggable triplet utilities `s(src, hyp, ref) -> score` and the batched
//! hypothesis-by-reference score matrix.
//!
//! `DotLinear` is exactly affine in the reference argument and serves as
//! the exactness oracle for the centroid approximations. `MlpSurrogate` is
//! a deliberately nonlinear stand-in for a learned regression head: the
//! triplet is expanded into `[src; hyp; ref; hyp*ref; |hyp-ref|]` and fed
//! through a small tanh feed-forward stack whose weights are generated
//! deterministically from a seed.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{dot_dd, dot_fd, sq_dist_fd, sq_norm_d, sq_norm_f, upcast_f64};
use crate::rng::RngHandle;
use crate::thread_count;
use crate::types::EmbeddingMatrix;

/// Hidden layer widths used when none are given.
pub const DEFAULT_MLP_HIDDEN: [usize; 2] = [16, 8];

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    /// `hyp.ref + src.ref`; exactly affine in `ref`.
    DotLinear,
    /// Cosine similarity between `hyp` and `ref`; errors on zero-norm input.
    CosineSim,
    /// `exp(-gamma * ||hyp - ref||^2)`.
    RbfKernel { gamma: f64 },
    /// Seeded random feed-forward scorer, nonlinear in `ref`.
    MlpSurrogate { seed: u64, hidden_dims: Vec<usize> },
}

/// A triplet score function plus its human-readable name.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFn {
    kind: UtilityKind,
    name: String,
}

impl UtilityFn {
    pub fn new(kind: UtilityKind) -> Self {
        let name = match &kind {
            UtilityKind::DotLinear => "dot".to_string(),
            UtilityKind::CosineSim => "cosine".to_string(),
            UtilityKind::RbfKernel { gamma } => format!("rbf:{gamma}"),
            UtilityKind::MlpSurrogate { seed, .. } => format!("mlp:{seed}"),
        };
        Self { kind, name }
    }

    pub fn dot_linear() -> Self {
        Self::new(UtilityKind::DotLinear)
    }

    pub fn cosine() -> Self {
        Self::new(UtilityKind::CosineSim)
    }

    pub fn rbf(gamma: f64) -> Self {
        assert!(gamma > 0.0, "rbf gamma must be positive, got {gamma}");
        Self::new(UtilityKind::RbfKernel { gamma })
    }

    pub fn mlp(seed: u64) -> Self {
        Self::mlp_with_dims(seed, DEFAULT_MLP_HIDDEN.to_vec())
    }

    pub fn mlp_with_dims(seed: u64, hidden_dims: Vec<usize>) -> Self {
        assert!(
            !hidden_dims.is_empty() && hidden_dims.iter().all(|&h| h > 0),
            "mlp hidden dims must be non-empty positive counts"
        );
        Self::new(UtilityKind::MlpSurrogate { seed, hidden_dims })
    }

    pub fn kind(&self) -> &UtilityKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Scalar triplet score.
    pub fn score(&self, src: &[f32], hyp: &[f32], reference: &[f32]) -> Result<f64> {
        self.score_ref64(src, hyp, &upcast_f64(reference))
    }

    /// Scalar score against an f64 reference vector. The f32 entry point
    /// upcasts and delegates here, so both paths share one kernel.
    pub fn score_ref64(&self, src: &[f32], hyp: &[f32], reference: &[f64]) -> Result<f64> {
        check_dims(src.len(), hyp.len(), reference.len())?;
        match &self.kind {
            UtilityKind::DotLinear | UtilityKind::CosineSim | UtilityKind::RbfKernel { .. } => {
                simple_kernel(&self.kind, src, hyp, reference)
            }
            UtilityKind::MlpSurrogate { seed, hidden_dims } => {
                let mut net = MlpNet::new(*seed, src.len(), hidden_dims);
                let a_src = net.row_contrib(BLOCK_SRC, &upcast_f64(src));
                let b_hyp = net.row_contrib(BLOCK_HYP, &upcast_f64(hyp));
                let c_ref = net.row_contrib(BLOCK_REF, reference);
                Ok(net.pair_score(&a_src, &b_hyp, &c_ref, hyp, reference))
            }
        }
    }

    /// Full `N_h x N_r` score matrix; entry `(i, j)` equals the scalar
    /// score of hypothesis `i` against reference `j`.
    pub fn score_matrix(
        &self,
        src: &[f32],
        hyps: &EmbeddingMatrix,
        refs: &EmbeddingMatrix,
    ) -> Result<ScoreMatrix> {
        check_dims(src.len(), hyps.dims(), refs.dims())?;
        let refs64: Vec<Vec<f64>> = refs.iter_rows().map(upcast_f64).collect();
        self.score_matrix_ref64(src, hyps, &refs64)
    }

    /// Score matrix against f64 reference rows (e.g. cluster means).
    pub fn score_matrix_ref64(
        &self,
        src: &[f32],
        hyps: &EmbeddingMatrix,
        refs: &[Vec<f64>],
    ) -> Result<ScoreMatrix> {
        if hyps.is_empty() {
            return Err(Error::EmptySet("hypotheses"));
        }
        if refs.is_empty() {
            return Err(Error::EmptySet("references"));
        }
        check_dims(src.len(), hyps.dims(), refs[0].len())?;
        let n_refs = refs.len();
        let mut values = vec![0.0f64; hyps.rows() * n_refs];

        match &self.kind {
            UtilityKind::MlpSurrogate { seed, hidden_dims } => {
                self.mlp_matrix(*seed, hidden_dims, src, hyps, refs, &mut values);
            }
            kind => {
                let fill_row = |i: usize, out: &mut [f64]| -> Result<()> {
                    let hyp = hyps.row(i);
                    for (slot, r) in out.iter_mut().zip(refs) {
                        *slot = simple_kernel(kind, src, hyp, r)?;
                    }
                    Ok(())
                };
                if thread_count() > 1 && hyps.rows() > 1 {
                    values
                        .par_chunks_mut(n_refs)
                        .enumerate()
                        .try_for_each(|(i, out)| fill_row(i, out))?;
                } else {
                    for (i, out) in values.chunks_mut(n_refs).enumerate() {
                        fill_row(i, out)?;
                    }
                }
            }
        }

        ScoreMatrix::new(values, hyps.rows(), n_refs)
    }

    /// Batched surrogate scoring. The per-row first-layer contributions of
    /// src, hyp, and ref are computed once and reused across pairs; only
    /// the elementwise interaction blocks remain pairwise work. Summation
    /// order inside each pair matches the scalar path, so the two agree
    /// bitwise.
    fn mlp_matrix(
        &self,
        seed: u64,
        hidden_dims: &[usize],
        src: &[f32],
        hyps: &EmbeddingMatrix,
        refs: &[Vec<f64>],
        values: &mut [f64],
    ) {
        let d = src.len();
        let mut net = MlpNet::new(seed, d, hidden_dims);
        let h1 = net.h1;
        let a_src = net.row_contrib(BLOCK_SRC, &upcast_f64(src));
        let mut b_hyp = vec![0.0f64; hyps.rows() * h1];
        for (i, hyp) in hyps.iter_rows().enumerate() {
            let contrib = net.row_contrib(BLOCK_HYP, &upcast_f64(hyp));
            b_hyp[i * h1..(i + 1) * h1].copy_from_slice(&contrib);
        }
        let mut c_ref = vec![0.0f64; refs.len() * h1];
        for (j, r) in refs.iter().enumerate() {
            let contrib = net.row_contrib(BLOCK_REF, r);
            c_ref[j * h1..(j + 1) * h1].copy_from_slice(&contrib);
        }

        let n_refs = refs.len();
        let fill_row = |net: &mut MlpNet, i: usize, out: &mut [f64]| {
            let hyp = hyps.row(i);
            let bh = &b_hyp[i * h1..(i + 1) * h1];
            for (j, slot) in out.iter_mut().enumerate() {
                let cr = &c_ref[j * h1..(j + 1) * h1];
                *slot = net.pair_score(&a_src, bh, cr, hyp, &refs[j]);
            }
        };

        if thread_count() > 1 && hyps.rows() > 1 {
            values
                .par_chunks_mut(n_refs)
                .enumerate()
                .for_each_init(
                    || MlpNet::new(seed, d, hidden_dims),
                    |net, (i, out)| fill_row(net, i, out),
                );
        } else {
            for (i, out) in values.chunks_mut(n_refs).enumerate() {
                fill_row(&mut net, i, out);
            }
        }
    }
}

fn check_dims(src: usize, hyp: usize, reference: usize) -> Result<()> {
    if src != hyp || src != reference {
        return Err(Error::DimensionMismatch {
            context: "utility triplet dims",
            expected: src,
            actual: if hyp != src { hyp } else { reference },
        });
    }
    Ok(())
}

fn simple_kernel(kind: &UtilityKind, src: &[f32], hyp: &[f32], r: &[f64]) -> Result<f64> {
    match kind {
        UtilityKind::DotLinear => Ok(dot_fd(hyp, r) + dot_fd(src, r)),
        UtilityKind::CosineSim => {
            let nh = sq_norm_f(hyp);
            let nr = sq_norm_d(r);
            if nh == 0.0 || nr == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(dot_fd(hyp, r) / (nh * nr).sqrt())
        }
        UtilityKind::RbfKernel { gamma } => Ok((-gamma * sq_dist_fd(hyp, r)).exp()),
        UtilityKind::MlpSurrogate { .. } => unreachable!("mlp handled by MlpNet"),
    }
}

/// Layer shapes `(fan_in, fan_out)` for the surrogate applied to
/// `input_dims`-dimensional embeddings: the feature vector is five
/// concatenated `input_dims` blocks; the output layer is scalar.
pub fn mlp_layer_dims(input_dims: usize, hidden_dims: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden_dims.len() + 1);
    let mut fan_in = 5 * input_dims;
    for &h in hidden_dims {
        dims.push((fan_in, h));
        fan_in = h;
    }
    dims.push((fan_in, 1));
    dims
}

/// Deterministic surrogate weights: one ChaCha8 stream per seed, layers in
/// order, each layer row-major `(fan_out, fan_in)`, every weight uniform in
/// `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`. Biases are zero and
/// not materialized.
pub fn mlp_weights(seed: u64, input_dims: usize, hidden_dims: &[usize]) -> Vec<Vec<f32>> {
    let mut stream = RngHandle::new(seed).stream();
    mlp_layer_dims(input_dims, hidden_dims)
        .iter()
        .map(|&(fan_in, fan_out)| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| ((stream.random::<f64>() * 2.0 - 1.0) * a) as f32)
                .collect()
        })
        .collect()
}

// Feature-block order within the first layer's fan-in.
const BLOCK_SRC: usize = 0;
const BLOCK_HYP: usize = 1;
const BLOCK_REF: usize = 2;
const BLOCK_PROD: usize = 3;
const BLOCK_ABSDIFF: usize = 4;

/// Materialized surrogate network.
///
/// The first layer's weight matrix is stored as five `h1 x d` blocks, one
/// per feature segment, so the contribution of a single segment to the
/// first pre-activation can be computed in isolation. The first layer's
/// output for a pair is assembled as
/// `src-block + hyp-block + ref-block + prod-block + absdiff-block`, in
/// that order, which is the decomposition of the full feature dot product
/// into its five segments. Scratch buffers avoid per-pair allocation.
struct MlpNet {
    d: usize,
    h1: usize,
    /// Five first-layer blocks, each `h1 x d` row-major, upcast to f64.
    blocks: Vec<Vec<f64>>,
    /// Layers after the first: `(fan_in, fan_out, weights)`, f64.
    upper: Vec<(usize, usize, Vec<f64>)>,
    prod: Vec<f64>,
    absdiff: Vec<f64>,
    act_a: Vec<f64>,
    act_b: Vec<f64>,
}

impl MlpNet {
    fn new(seed: u64, input_dims: usize, hidden_dims: &[usize]) -> Self {
        let layer_dims = mlp_layer_dims(input_dims, hidden_dims);
        let weights = mlp_weights(seed, input_dims, hidden_dims);
        let d = input_dims;
        let (fan_in_1, h1) = layer_dims[0];
        debug_assert_eq!(fan_in_1, 5 * d);

        let mut blocks = vec![vec![0.0f64; h1 * d]; 5];
        for o in 0..h1 {
            let row = &weights[0][o * 5 * d..(o + 1) * 5 * d];
            for (b, block) in blocks.iter_mut().enumerate() {
                for i in 0..d {
                    block[o * d + i] = row[b * d + i] as f64;
                }
            }
        }

        let upper: Vec<(usize, usize, Vec<f64>)> = layer_dims[1..]
            .iter()
            .zip(&weights[1..])
            .map(|(&(fi, fo), w)| (fi, fo, w.iter().map(|&v| v as f64).collect()))
            .collect();

        let max_width = layer_dims.iter().map(|&(_, fo)| fo).max().unwrap_or(1);
        Self {
            d,
            h1,
            blocks,
            upper,
            prod: vec![0.0; d],
            absdiff: vec![0.0; d],
            act_a: vec![0.0; max_width],
            act_b: vec![0.0; max_width],
        }
    }

    /// First-layer contribution of one feature segment: `h1` dot products
    /// of the block's rows against `v`.
    fn row_contrib(&self, block: usize, v: &[f64]) -> Vec<f64> {
        let d = self.d;
        let w = &self.blocks[block];
        (0..self.h1).map(|o| dot_dd(&w[o * d..(o + 1) * d], v)).collect()
    }

    /// Score of one (hypothesis, reference) pair given the precomputed
    /// src/hyp/ref first-layer contributions.
    fn pair_score(&mut self, a_src: &[f64], b_hyp: &[f64], c_ref: &[f64], hyp: &[f32], r: &[f64]) -> f64 {
        let d = self.d;
        for i in 0..d {
            let h = hyp[i] as f64;
            self.prod[i] = h * r[i];
            self.absdiff[i] = (h - r[i]).abs();
        }

        let layer1_is_output = self.upper.is_empty();
        let wp = &self.blocks[BLOCK_PROD];
        let wa = &self.blocks[BLOCK_ABSDIFF];
        for o in 0..self.h1 {
            let e = dot_dd(&wp[o * d..(o + 1) * d], &self.prod);
            let f = dot_dd(&wa[o * d..(o + 1) * d], &self.absdiff);
            let z = a_src[o] + b_hyp[o] + c_ref[o] + e + f;
            self.act_a[o] = if layer1_is_output { z } else { z.tanh() };
        }
        if layer1_is_output {
            return self.act_a[0];
        }

        let n_upper = self.upper.len();
        let mut input = std::mem::take(&mut self.act_a);
        let mut output = std::mem::take(&mut self.act_b);
        for (l, (fan_in, fan_out, w)) in self.upper.iter().enumerate() {
            let last = l + 1 == n_upper;
            for o in 0..*fan_out {
                let z = dot_dd(&w[o * fan_in..(o + 1) * fan_in], &input[..*fan_in]);
                output[o] = if last { z } else { z.tanh() };
            }
            std::mem::swap(&mut input, &mut output);
        }
        let result = input[0];
        self.act_a = input;
        self.act_b = output;
        result
    }
}

/// Batched scores: `hyp_count x col_count`, row-major, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: Vec<f64>,
    hyp_count: usize,
    col_count: usize,
}

impl ScoreMatrix {
    fn new(values: Vec<f64>, hyp_count: usize, col_count: usize) -> Result<Self> {
        debug_assert_eq!(values.len(), hyp_count * col_count);
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: "score matrix",
                position,
            });
        }
        Ok(Self {
            values,
            hyp_count,
            col_count,
        })
    }

    pub fn hyp_count(&self) -> usize {
        self.hyp_count
    }

    pub fn col_count(&self) -> usize {
        self.col_count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.col_count + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.col_count..(i + 1) * self.col_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.col_count)
    }
}
