//! Deterministic synthetic instance generators.
//!
//! Two regimes: a single diffuse blob standing in for diversely sampled
//! candidates, and a mixture of blobs standing in for candidate sets pooled
//! from several systems, where cluster sizes are deliberately unbalanced.
//! Blobs are isotropic Gaussians; their centers, radii, and counts live in
//! scenario files so experiments are reproducible from committed data.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::types::{CandidateInstance, EmbeddingMatrix};

/// One isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub center: Vec<f32>,
    /// Per-coordinate standard deviation.
    pub radius: f32,
    pub count: usize,
}

/// How the instance's source vector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// Zero vector.
    Origin,
    /// Unweighted mean of the blob centers.
    BlobMean,
}

/// A multi-blob generation scenario, serializable as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dims: usize,
    pub seed: u64,
    pub source_mode: SourceMode,
    pub blobs: Vec<BlobSpec>,
}

impl ScenarioSpec {
    pub fn total_count(&self) -> usize {
        self.blobs.iter().map(|b| b.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::InvalidScenario("dims must be at least 1".into()));
        }
        if self.total_count() == 0 {
            return Err(Error::InvalidScenario(
                "total candidate count across blobs must be at least 1".into(),
            ));
        }
        for (i, blob) in self.blobs.iter().enumerate() {
            if blob.center.len() != self.dims {
                return Err(Error::InvalidScenario(format!(
                    "blob {i} center has {} coordinates, scenario dims is {}",
                    blob.center.len(),
                    self.dims
                )));
            }
            if !(blob.radius > 0.0) || !blob.radius.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "blob {i} radius must be a positive finite number"
                )));
            }
            if blob.count == 0 {
                return Err(Error::InvalidScenario(format!(
                    "blob {i} count must be at least 1"
                )));
            }
            if blob.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "blob {i} center contains a non-finite value"
                )));
            }
        }
        Ok(())
    }
}

/// An instance plus the blob index each candidate was drawn from. The
/// membership is an analysis sidecar: decoders never see it.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: CandidateInstance,
    pub blob_membership: Vec<usize>,
}

fn sample_blob_rows(
    rng: &mut ChaCha8Rng,
    center: &[f32],
    radius: f32,
    count: usize,
    out: &mut Vec<f32>,
) {
    for _ in 0..count {
        for &c in center {
            let z: f64 = rng.sample(StandardNormal);
            out.push((c as f64 + radius as f64 * z) as f32);
        }
    }
}

/// Single diffuse blob of `n` candidates at a seeded random center, unit
/// radius; the hypothesis set doubles as the pseudo-reference set and the
/// blob center doubles as the source vector.
pub fn gen_diverse(n: usize, dims: usize, seed: u64) -> Result<CandidateInstance> {
    if n == 0 {
        return Err(Error::EmptySet("candidate count"));
    }
    if dims == 0 {
        return Err(Error::InvalidScenario("dims must be at least 1".into()));
    }
    let mut rng = RngHandle::new(seed).stream();
    let center: Vec<f32> = (0..dims)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    let mut data = Vec::with_capacity(n * dims);
    sample_blob_rows(&mut rng, &center, 1.0, n, &mut data);
    let hyps = EmbeddingMatrix::new(data, n, dims)?;
    CandidateInstance::shared(center, hyps)
}

/// Concatenates blob samples in blob order; the hypothesis set doubles as
/// the pseudo-reference set.
pub fn gen_multisystem(spec: &ScenarioSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let mut rng = RngHandle::new(spec.seed).stream();
    let total = spec.total_count();
    let mut data = Vec::with_capacity(total * spec.dims);
    let mut membership = Vec::with_capacity(total);
    for (i, blob) in spec.blobs.iter().enumerate() {
        sample_blob_rows(&mut rng, &blob.center, blob.radius, blob.count, &mut data);
        membership.extend(std::iter::repeat(i).take(blob.count));
    }
    let hyps = EmbeddingMatrix::new(data, total, spec.dims)?;

    let source = match spec.source_mode {
        SourceMode::Origin => vec![0.0f32; spec.dims],
        SourceMode::BlobMean => {
            let n = spec.blobs.len() as f64;
            (0..spec.dims)
                .map(|d| {
                    (spec.blobs.iter().map(|b| b.center[d] as f64).sum::<f64>() / n) as f32
                })
                .collect()
        }
    };
    let instance = CandidateInstance::shared(source, hyps)?;
    Ok(GeneratedInstance {
        instance,
        blob_membership: membership,
    })
}
