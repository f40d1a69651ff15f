use std::path::Path;

use nalgebra::DMatrix;

use super::{DatasetError, LabeledImageSet, Split};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32, DatasetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| DatasetError::Truncated(format!("{what} header")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DatasetError> {
    let found = be_u32(bytes, 0, "magic number")?;
    if found != expected {
        return Err(DatasetError::BadMagic { expected, found });
    }
    Ok(())
}

/// Parses an IDX image file: returns `(rows, cols, pixels)` with pixels in
/// `[0, 1]`, one image per column.
pub fn read_idx_images(bytes: &[u8]) -> Result<(usize, usize, DMatrix<f64>), DatasetError> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let d = rows * cols;
    let body = &bytes[16..];
    let need = n
        .checked_mul(d)
        .ok_or_else(|| DatasetError::Truncated("image dimensions overflow".into()))?;
    if body.len() < need {
        return Err(DatasetError::Truncated(format!("{} pixel bytes, expected {need}", body.len())));
    }
    if body.len() > need {
        return Err(DatasetError::InvalidConfig(format!("{} trailing bytes after pixels", body.len() - need)));
    }
    let pixels = DMatrix::from_iterator(d, n, body.iter().map(|&b| f64::from(b) / 255.0));
    Ok((rows, cols, pixels))
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DatasetError> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(DatasetError::Truncated(format!("{} label bytes, expected {n}", body.len())));
    }
    if body.len() > n {
        return Err(DatasetError::InvalidConfig(format!("{} trailing bytes after labels", body.len() - n)));
    }
    if let Some(&l) = body.iter().find(|&&l| l > 9) {
        return Err(DatasetError::LabelOutOfRange(l));
    }
    Ok(body.to_vec())
}

/// Loads an IDX image/label pair, scales pixels to `[0, 1]` and subtracts
/// the per-pixel mean.
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<LabeledImageSet, DatasetError> {
    let mut set = load_idx_raw(images, labels, split)?;
    set.normalize(None)?;
    Ok(set)
}

/// Like [`load_idx`] but without mean subtraction, for callers that split
/// first and normalize with the training mean.
pub fn load_idx_raw(images: &Path, labels: &Path, split: Split) -> Result<LabeledImageSet, DatasetError> {
    let (_, _, pixels) = read_idx_images(&std::fs::read(images)?)?;
    let labels = read_idx_labels(&std::fs::read(labels)?)?;
    LabeledImageSet::new(pixels, labels, split)
}
