//! Compression-step solvers: optimal scalar quantization of a weight vector
//! under adaptive, fixed and fixed-with-scale codebooks.
//!
//! Every solver returns a [`QuantParams`], i.e. a codebook plus one index per
//! weight. Indices are 0-based: index `k` selects `codebook.entries()[k]`.

mod fixed;
mod kmeans;

pub use fixed::{
    binarize, binarize_scale, fixed_scale_alternate, pow2_codebook, pow2_quantize, pow2_value,
    ternarize, ternarize_scale,
};
pub use kmeans::{kmeans_1d, kmedians_1d, ClusterResult, KMeansInit, MAX_LLOYD_ITERS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("codebook must have at least one entry")]
    EmptyCodebook,
    #[error("codebook entries must be finite and strictly increasing")]
    UnsortedCodebook,
    #[error("scale must be finite and positive, got {0}")]
    BadScale(f64),
    #[error("assignment index {index} out of range for codebook of size {k}")]
    IndexOutOfRange { index: u32, k: usize },
    #[error("cannot quantize an empty weight vector")]
    EmptyInput,
    #[error("weight vector contains non-finite values")]
    NonFinite,
    #[error("codebook size must be at least 1")]
    ZeroClusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    Adaptive,
    Fixed,
    FixedWithScale,
}

/// Sorted scalar codebook, optionally multiplied by a global scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<f64>,
    kind: CodebookKind,
    scale: Option<f64>,
}

fn check_entries(entries: &[f64]) -> Result<(), QuantizeError> {
    if entries.is_empty() {
        return Err(QuantizeError::EmptyCodebook);
    }
    if entries.iter().any(|c| !c.is_finite()) || entries.windows(2).any(|p| p[0] >= p[1]) {
        return Err(QuantizeError::UnsortedCodebook);
    }
    Ok(())
}

impl Codebook {
    pub fn adaptive(entries: Vec<f64>) -> Result<Self, QuantizeError> {
        check_entries(&entries)?;
        Ok(Self { entries, kind: CodebookKind::Adaptive, scale: None })
    }

    pub fn fixed(entries: Vec<f64>) -> Result<Self, QuantizeError> {
        check_entries(&entries)?;
        Ok(Self { entries, kind: CodebookKind::Fixed, scale: None })
    }

    pub fn fixed_with_scale(entries: Vec<f64>, scale: f64) -> Result<Self, QuantizeError> {
        check_entries(&entries)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(QuantizeError::BadScale(scale));
        }
        Ok(Self { entries, kind: CodebookKind::FixedWithScale, scale: Some(scale) })
    }

    /// Scaled codebook whose scale collapsed to zero (all-zero input).
    pub(crate) fn zero_scaled(entries: Vec<f64>) -> Self {
        Self { entries, kind: CodebookKind::FixedWithScale, scale: Some(0.0) }
    }

    /// `{-1, +1}`
    pub fn binary() -> Self {
        Self { entries: vec![-1.0, 1.0], kind: CodebookKind::Fixed, scale: None }
    }

    /// `{-1, 0, +1}`
    pub fn ternary() -> Self {
        Self { entries: vec![-1.0, 0.0, 1.0], kind: CodebookKind::Fixed, scale: None }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value a weight assigned to entry `k` decompresses to.
    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.scale.unwrap_or(1.0) * self.entries[k]
    }

    /// Entries with the scale applied.
    pub fn values(&self) -> Vec<f64> {
        (0..self.entries.len()).map(|k| self.value(k)).collect()
    }
}

/// One codebook index per weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignments(Vec<u32>);

impl Assignments {
    pub fn new(indices: Vec<u32>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// Codebook and assignments for one quantized weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantParams {
    codebook: Codebook,
    assignments: Assignments,
    degenerate: bool,
}

impl QuantParams {
    pub fn new(codebook: Codebook, assignments: Assignments) -> Result<Self, QuantizeError> {
        let k = codebook.len();
        if let Some(&index) = assignments.indices().iter().find(|&&i| i as usize >= k) {
            return Err(QuantizeError::IndexOutOfRange { index, k });
        }
        Ok(Self { codebook, assignments, degenerate: false })
    }

    pub(crate) fn from_parts(codebook: Codebook, assignments: Vec<u32>, degenerate: bool) -> Self {
        debug_assert!(assignments.iter().all(|&i| (i as usize) < codebook.len()));
        Self { codebook, assignments: Assignments(assignments), degenerate }
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn assignments(&self) -> &Assignments {
        &self.assignments
    }

    /// Set when a scaled quantizer received an all-zero vector and the scale
    /// collapsed to 0.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Squared distortion `sum_i (w_i - decompressed_i)^2`.
    pub fn distortion(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(self.assignments.indices())
            .map(|(&x, &k)| {
                let d = x - self.codebook.value(k as usize);
                d * d
            })
            .sum()
    }
}

/// Bits needed to store one index into a codebook of size `k`,
/// `ceil(log2 k)`; zero for a single-entry codebook.
pub fn index_bits(k: usize) -> u32 {
    assert!(k >= 1, "codebook size must be at least 1");
    usize::BITS - (k - 1).leading_zeros()
}

/// Table lookup of each weight's codebook entry, times the scale if present.
pub fn decompress(q: &QuantParams) -> Vec<f64> {
    let values = q.codebook.values();
    q.assignments.indices().iter().map(|&k| values[k as usize]).collect()
}

/// Nearest-entry assignment against sorted `centers` by binary search over the
/// midpoints. A weight exactly on a midpoint goes to the higher index.
pub(crate) fn nearest_sorted(w: &[f64], centers: &[f64]) -> Vec<u32> {
    let midpoints: Vec<f64> = centers.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    w.iter()
        .map(|&t| midpoints.partition_point(|&m| m <= t) as u32)
        .collect()
}

/// Optimal assignment of every weight to a fixed codebook, `O(P log K)`.
///
/// The scale of a scaled codebook is honoured.
pub fn assign_fixed(w: &[f64], codebook: &Codebook) -> Assignments {
    let centers = codebook.values();
    // a positive scale keeps the entries sorted; a zero scale collapses them
    if codebook.scale() == Some(0.0) {
        let zero = codebook.entries().iter().position(|&c| c == 0.0).unwrap_or(0) as u32;
        return Assignments(vec![zero; w.len()]);
    }
    Assignments(nearest_sorted(w, &centers))
}

pub(crate) fn check_weights(w: &[f64]) -> Result<(), QuantizeError> {
    if w.is_empty() {
        return Err(QuantizeError::EmptyInput);
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(QuantizeError::NonFinite);
    }
    Ok(())
}
