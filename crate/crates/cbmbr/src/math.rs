//! Small numeric kernels: f32 storage, f64 accumulation, fixed order.

use crate::types::EmbeddingMatrix;

/// Dot product of two f32 slices, accumulated in f64.
#[inline]
pub(crate) fn dot_ff(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * *y as f64;
    }
    acc
}

/// Dot product of an f32 slice against an f64 slice.
#[inline]
pub(crate) fn dot_fd(a: &[f32], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * *y;
    }
    acc
}

/// f64 dot product with four running partials, folded as
/// `(s0 + s1) + (s2 + s3)` plus a tail. The fixed fold order keeps the
/// result identical across calls; the partials let the compiler keep the
/// hot loop in vector registers.
#[inline]
pub(crate) fn dot_dd(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4 * 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut acc = (s0 + s1) + (s2 + s3);
    while i < n {
        acc += a[i] * b[i];
        i += 1;
    }
    acc
}

#[inline]
pub(crate) fn sq_norm_f(a: &[f32]) -> f64 {
    dot_ff(a, a)
}

#[inline]
pub(crate) fn sq_norm_d(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Squared Euclidean distance via the direct difference sum.
#[inline]
pub(crate) fn sq_dist_fd(a: &[f32], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y;
        acc += d * d;
    }
    acc
}

/// Squared Euclidean distance in the expanded form
/// `||p||^2 + ||c||^2 - 2 p.c`, clamped at zero to absorb negative
/// round-off. Callers cache the squared norms.
#[inline]
pub(crate) fn expanded_sq_dist(p_norm: f64, c_norm: f64, dot: f64) -> f64 {
    (p_norm + c_norm - 2.0 * dot).max(0.0)
}

/// Squared norm of every row, f64-accumulated.
pub(crate) fn row_sq_norms(m: &EmbeddingMatrix) -> Vec<f64> {
    m.iter_rows().map(sq_norm_f).collect()
}

/// Arithmetic mean of the selected rows in ascending index order,
/// accumulated in f64 and rounded to f32 once per coordinate.
///
/// The fixed order makes every caller that averages the same row set
/// produce bitwise-identical output.
pub(crate) fn mean_rows_f32(m: &EmbeddingMatrix, indices: &[usize]) -> Vec<f32> {
    let acc = sum_rows_f64(m, indices);
    let n = indices.len() as f64;
    acc.into_iter().map(|v| (v / n) as f32).collect()
}

pub(crate) fn sum_rows_f64(m: &EmbeddingMatrix, indices: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0f64; m.dims()];
    for &i in indices {
        for (a, v) in acc.iter_mut().zip(m.row(i)) {
            *a += *v as f64;
        }
    }
    acc
}

/// Upcast a row-major f32 matrix to a flat f64 buffer.
pub(crate) fn upcast_f64(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}
