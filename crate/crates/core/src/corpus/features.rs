//! Hashed bag-of-words features.
//!
//! Tokens are maximal runs of alphanumeric characters, lowercased, hashed
//! with 64-bit FNV-1a over their UTF-8 bytes and reduced modulo the feature
//! dimension. Counts are L2-normalized. The hash is seedless, so every
//! implementation that follows these rules produces identical vectors.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Feature space size: a power of two, at least 2^10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FeatureDim(usize);

impl FeatureDim {
    pub const MIN: usize = 1 << 10;

    pub fn new(dimension: usize) -> Result<Self> {
        if dimension < Self::MIN || !dimension.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "feature dimension must be a power of two >= {}, got {dimension}",
                Self::MIN
            )));
        }
        Ok(FeatureDim(dimension))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for FeatureDim {
    fn default() -> Self {
        FeatureDim(1 << 14)
    }
}

impl TryFrom<usize> for FeatureDim {
    type Error = Error;
    fn try_from(value: usize) -> Result<Self> {
        FeatureDim::new(value)
    }
}

impl From<FeatureDim> for usize {
    fn from(d: FeatureDim) -> usize {
        d.0
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    dimension: usize,
}

impl FeatureVector {
    /// Builds a vector from parallel index/value lists. Indices must be
    /// strictly increasing and below `dimension`; values finite and non-negative.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dimension: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidConfig("indices and values differ in length".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("indices must be strictly increasing".into()));
        }
        if indices.last().is_some_and(|&i| i as usize >= dimension) {
            return Err(Error::InvalidConfig("index out of range".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("values must be finite and non-negative".into()));
        }
        Ok(FeatureVector { indices, values, dimension })
    }

    pub fn zeros(dimension: usize) -> Self {
        FeatureVector { indices: Vec::new(), values: Vec::new(), dimension }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Dot product with a dense weight row.
    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }
}

/// Splits on non-alphanumeric boundaries and lowercases.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn hash_token(token: &str, dim: FeatureDim) -> u32 {
    // dim is a power of two, so masking is reduction modulo dim
    (fnv1a64(token.as_bytes()) & (dim.get() as u64 - 1)) as u32
}

/// Featurizes raw text. Empty text gives the zero vector.
pub fn featurize_text(text: &str, dim: FeatureDim) -> FeatureVector {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(hash_token(&token, dim)).or_insert(0.0) += 1.0;
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let (indices, values) = counts.into_iter().map(|(i, c)| (i, c / norm)).unzip();
    FeatureVector { indices, values, dimension: dim.get() }
}
