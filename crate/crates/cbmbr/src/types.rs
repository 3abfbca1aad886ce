//! Core data model: embedding matrices, decoding instances, and decode results.
//!
//! All values are stored as `f32`; every reduction over them (sums, means,
//! expected utilities) accumulates in `f64`. Types are immutable after
//! construction, so their invariants (shape agreement, finiteness) are
//! enforced once by the constructors and hold for the lifetime of the value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix of `rows` embedding vectors, each of `dims` coordinates.
///
/// Invariants: `data.len() == rows * dims`, `dims >= 1`, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    rows: usize,
    dims: usize,
}

impl EmbeddingMatrix {
    pub fn new(data: Vec<f32>, rows: usize, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::DimensionMismatch {
                context: "embedding matrix dims",
                expected: 1,
                actual: 0,
            });
        }
        if data.len() != rows * dims {
            return Err(Error::DimensionMismatch {
                context: "embedding matrix data length",
                expected: rows * dims,
                actual: data.len(),
            });
        }
        check_finite(&data, "embedding matrix")?;
        Ok(Self { data, rows, dims })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(Error::DimensionMismatch {
                    context: "embedding matrix row",
                    expected: dims,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), dims)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims)
    }
}

fn check_finite(values: &[f32], context: &'static str) -> Result<()> {
    for (position, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { context, position });
        }
    }
    Ok(())
}

/// One decoding problem: a source vector, `N_h` hypothesis vectors, and
/// `N_r` pseudo-reference vectors.
///
/// The usual convention treats the hypothesis set itself as the
/// pseudo-reference set; that case is represented structurally (no second
/// matrix is stored), so the two sets cannot drift apart.
#[derive(Debug, Clone)]
pub struct CandidateInstance {
    source: Vec<f32>,
    hypotheses: EmbeddingMatrix,
    pseudo_refs: Option<EmbeddingMatrix>,
}

impl CandidateInstance {
    /// Instance where the pseudo-reference set is the hypothesis set.
    pub fn shared(source: Vec<f32>, hypotheses: EmbeddingMatrix) -> Result<Self> {
        let inst = Self {
            source,
            hypotheses,
            pseudo_refs: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with an explicit pseudo-reference set.
    pub fn with_refs(
        source: Vec<f32>,
        hypotheses: EmbeddingMatrix,
        pseudo_refs: EmbeddingMatrix,
    ) -> Result<Self> {
        let inst = Self {
            source,
            hypotheses,
            pseudo_refs: Some(pseudo_refs),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn source(&self) -> &[f32] {
        &self.source
    }

    pub fn hypotheses(&self) -> &EmbeddingMatrix {
        &self.hypotheses
    }

    pub fn pseudo_refs(&self) -> &EmbeddingMatrix {
        self.pseudo_refs.as_ref().unwrap_or(&self.hypotheses)
    }

    pub fn shares_refs_with_hyps(&self) -> bool {
        self.pseudo_refs.is_none()
    }

    /// Checks the instance invariants: matching dimensions, at least one
    /// hypothesis and one pseudo-reference, finite source coordinates.
    /// Matrix finiteness is enforced by `EmbeddingMatrix` construction.
    pub fn validate(&self) -> Result<()> {
        let dims = self.source.len();
        check_finite(&self.source, "source vector")?;
        if dims == 0 {
            return Err(Error::DimensionMismatch {
                context: "source vector length",
                expected: 1,
                actual: 0,
            });
        }
        if self.hypotheses.dims() != dims {
            return Err(Error::DimensionMismatch {
                context: "hypotheses vs source dims",
                expected: dims,
                actual: self.hypotheses.dims(),
            });
        }
        let refs = self.pseudo_refs();
        if refs.dims() != dims {
            return Err(Error::DimensionMismatch {
                context: "pseudo-references vs source dims",
                expected: dims,
                actual: refs.dims(),
            });
        }
        if self.hypotheses.is_empty() {
            return Err(Error::EmptySet("hypotheses"));
        }
        if refs.is_empty() {
            return Err(Error::EmptySet("pseudo-references"));
        }
        Ok(())
    }
}

/// Checks all [`CandidateInstance`] invariants.
pub fn validate_instance(inst: &CandidateInstance) -> Result<()> {
    inst.validate()
}

/// Index of the maximum value, ties broken by the lowest index.
pub fn argmax_with_ties(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::EmptySet("argmax input"));
    }
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "argmax input",
                position: i,
            });
        }
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Selection rule identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "cbmbr")]
    Cbmbr,
    #[serde(rename = "cbmbr-cnt")]
    CbmbrCnt,
    #[serde(rename = "mean")]
    MeanAggregate,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Cbmbr => "cbmbr",
            Variant::CbmbrCnt => "cbmbr-cnt",
            Variant::MeanAggregate => "mean",
            Variant::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "cbmbr" => Ok(Variant::Cbmbr),
            "cbmbr-cnt" => Ok(Variant::CbmbrCnt),
            "mean" => Ok(Variant::MeanAggregate),
            "oracle" => Ok(Variant::Oracle),
            other => Err(format!(
                "unknown variant {other:?}; expected vanilla, cbmbr, cbmbr-cnt, or mean"
            )),
        }
    }
}

/// Phase names used in [`DecodeResult::phase_timings`] and bench reports.
pub mod phases {
    pub const GENERATION: &str = "generation";
    pub const KMEANS: &str = "kmeans";
    /// Mean computation of the aggregate path, the clustering-equivalent
    /// phase of the k = 1 shortcut.
    pub const AGGREGATE: &str = "aggregate";
    pub const UTILITY: &str = "utility";
    pub const END_TO_END: &str = "end_to_end";
}

/// Outcome of one selection: the winning hypothesis index, the expected
/// utility of every hypothesis, and wall-clock nanoseconds per phase.
#[derive(Debug, Clone, Serialize)]
pub struct DecodeResult {
    pub variant: Variant,
    pub selected_index: usize,
    pub expected_utilities: Vec<f64>,
    pub phase_timings: BTreeMap<String, u64>,
}

impl DecodeResult {
    /// Builds a result from per-hypothesis expected utilities; the selected
    /// index is the argmax (lowest index on ties), so the selection
    /// invariant holds by construction.
    pub fn from_utilities(
        variant: Variant,
        expected_utilities: Vec<f64>,
        phase_timings: BTreeMap<String, u64>,
    ) -> Result<Self> {
        let selected_index = argmax_with_ties(&expected_utilities)?;
        Ok(Self {
            variant,
            selected_index,
            expected_utilities,
            phase_timings,
        })
    }
}
