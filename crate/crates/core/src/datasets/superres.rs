use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::DatasetError;

/// Separable 4-tap downscaling filter (Catmull-Rom at the half-pixel
/// offset). Low-res sample `i` reads high-res samples `2i-1 .. 2i+2`.
pub const DOWNSCALE_KERNEL: [f64; 4] = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];

/// Low-res inputs and high-res targets, one pair per column.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPairSet {
    /// `(side/2)^2 x N`
    pub x: DMatrix<f64>,
    /// `side^2 x N`
    pub y: DMatrix<f64>,
    pub side: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub kernel: [f64; 4],
}

/// Halves a row-major `side x side` image with [`DOWNSCALE_KERNEL`] along
/// rows and then columns, clamping at the borders.
pub fn downscale(img: &[f64], side: usize) -> Result<Vec<f64>, DatasetError> {
    if side == 0 || side % 2 != 0 {
        return Err(DatasetError::OddSide(side));
    }
    if img.len() != side * side {
        return Err(DatasetError::InvalidConfig(format!("{} pixels for side {side}", img.len())));
    }
    let half = side / 2;
    let tap = |i: usize, t: usize| (2 * i + t).saturating_sub(1).min(side - 1);
    let mut rows = vec![0.0; side * half];
    for r in 0..side {
        for j in 0..half {
            rows[r * half + j] = (0..4).map(|t| DOWNSCALE_KERNEL[t] * img[r * side + tap(j, t)]).sum();
        }
    }
    let mut out = vec![0.0; half * half];
    for i in 0..half {
        for j in 0..half {
            out[i * half + j] = (0..4).map(|t| DOWNSCALE_KERNEL[t] * rows[tap(i, t) * half + j]).sum();
        }
    }
    Ok(out)
}

/// Builds regression pairs from high-res images (`side^2 x N`, row-major
/// pixels per column): each input is the downscaled image plus i.i.d.
/// Gaussian noise of standard deviation `noise_sigma`.
pub fn gen_superres(
    images: &DMatrix<f64>,
    side: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<RegressionPairSet, DatasetError> {
    if side % 2 != 0 {
        return Err(DatasetError::OddSide(side));
    }
    if images.nrows() != side * side || images.ncols() == 0 {
        return Err(DatasetError::InvalidConfig(format!(
            "expected a nonempty {}-row image matrix, got {}x{}",
            side * side,
            images.nrows(),
            images.ncols()
        )));
    }
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|_| DatasetError::InvalidConfig(format!("noise sigma {noise_sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = side / 2;
    let mut x = DMatrix::zeros(half * half, images.ncols());
    for (n, img) in images.column_iter().enumerate() {
        let low = downscale(img.as_slice(), side)?;
        for (i, v) in low.into_iter().enumerate() {
            x[(i, n)] = v + noise.sample(&mut rng);
        }
    }
    Ok(RegressionPairSet { x, y: images.clone(), side, noise_sigma, seed, kernel: DOWNSCALE_KERNEL })
}
