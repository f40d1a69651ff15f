//! Training data: super-resolution regression pairs, IDX image/label files
//! and synthetic classification sets.

mod idx;
mod superres;
mod synthetic;

pub use idx::{load_idx, load_idx_raw, read_idx_images, read_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use superres::{downscale, gen_superres, RegressionPairSet, DOWNSCALE_KERNEL};
pub use synthetic::{gen_synthetic_classes, synthetic_images, SyntheticClassesConfig};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file is truncated: {0}")]
    Truncated(String),
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {0} out of range")]
    LabelOutOfRange(u8),
    #[error("image side must be even, got {0}")]
    OddSide(usize),
    #[error("data set is already normalized")]
    AlreadyNormalized,
    #[error("invalid data configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Labelled samples, one per column of `images`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub images: DMatrix<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
    /// Per-pixel mean that was subtracted, once normalized.
    mean: Option<Vec<f64>>,
}

impl LabeledImageSet {
    pub fn new(images: DMatrix<f64>, labels: Vec<u8>, split: Split) -> Result<Self, DatasetError> {
        if images.ncols() != labels.len() {
            return Err(DatasetError::CountMismatch { images: images.ncols(), labels: labels.len() });
        }
        Ok(Self { images, labels, split, mean: None })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.mean.is_some()
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    /// Per-pixel mean over the samples.
    pub fn pixel_mean(&self) -> Vec<f64> {
        self.images.column_mean().as_slice().to_vec()
    }

    /// Subtracts `mean` (or this set's own per-pixel mean) from every
    /// sample. A set can be normalized only once.
    pub fn normalize(&mut self, mean: Option<&[f64]>) -> Result<(), DatasetError> {
        if self.mean.is_some() {
            return Err(DatasetError::AlreadyNormalized);
        }
        let mean = match mean {
            Some(m) if m.len() != self.dim() => {
                return Err(DatasetError::InvalidConfig(format!(
                    "mean has {} entries for {}-dimensional samples",
                    m.len(),
                    self.dim()
                )))
            }
            Some(m) => m.to_vec(),
            None => self.pixel_mean(),
        };
        let m = DVector::from_column_slice(&mean);
        for mut c in self.images.column_iter_mut() {
            c -= &m;
        }
        self.mean = Some(mean);
        Ok(())
    }

    /// Shuffles and cuts into a training part holding `train_fraction` of
    /// the samples and a test part with the rest.
    pub fn split(self, train_fraction: f64, seed: u64) -> Result<(Self, Self), DatasetError> {
        if self.is_normalized() {
            return Err(DatasetError::AlreadyNormalized);
        }
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(DatasetError::InvalidConfig(format!("train fraction {train_fraction} outside [0, 1]")));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (train_fraction * self.len() as f64).round() as usize;
        let part = |ix: &[usize], split| Self {
            images: self.images.select_columns(ix),
            labels: ix.iter().map(|&i| self.labels[i]).collect(),
            split,
            mean: None,
        };
        Ok((part(&order[..n_train], Split::Train), part(&order[n_train..], Split::Test)))
    }
}
