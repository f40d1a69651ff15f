use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledImageSet, Split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticClassesConfig {
    pub n_classes: usize,
    pub dim: usize,
    pub n: usize,
    /// Typical distance of a class centre from the origin, in units of the
    /// within-class standard deviation.
    pub separation: f64,
    pub seed: u64,
}

/// Gaussian blobs: class `c` has centre `separation * g_c / sqrt(dim)` with
/// `g_c` standard normal, samples add unit-variance noise, and labels are
/// drawn uniformly.
pub fn gen_synthetic_classes(cfg: &SyntheticClassesConfig) -> Result<LabeledImageSet, DatasetError> {
    if cfg.n_classes < 2 || cfg.n_classes > 256 {
        return Err(DatasetError::InvalidConfig(format!("need 2..=256 classes, got {}", cfg.n_classes)));
    }
    if cfg.dim == 0 || cfg.n == 0 {
        return Err(DatasetError::InvalidConfig("dimension and sample count must be positive".into()));
    }
    if !cfg.separation.is_finite() || cfg.separation < 0.0 {
        return Err(DatasetError::InvalidConfig(format!("separation {}", cfg.separation)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = cfg.separation / (cfg.dim as f64).sqrt();
    let centres = DMatrix::from_fn(cfg.dim, cfg.n_classes, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let labels: Vec<u8> = (0..cfg.n).map(|_| rng.random_range(0..cfg.n_classes) as u8).collect();
    let mut images = DMatrix::zeros(cfg.dim, cfg.n);
    for (j, &l) in labels.iter().enumerate() {
        for i in 0..cfg.dim {
            let e: f64 = StandardNormal.sample(&mut rng);
            images[(i, j)] = centres[(i, l as usize)] + e;
        }
    }
    LabeledImageSet::new(images, labels, Split::Train)
}

/// Stroke drawings in `[0, 1]`, `side x side` pixels row-major per column:
/// two to four thick line segments with soft edges on a dark background.
pub fn synthetic_images(n: usize, side: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let mut out = DMatrix::zeros(side * side, n);
    for j in 0..n {
        let strokes = rng.random_range(2..=4);
        let segs: Vec<[f64; 5]> = (0..strokes)
            .map(|_| {
                let mut p = || rng.random_range(0.2 * s..0.8 * s);
                [p(), p(), p(), p(), rng.random_range(0.04 * s..0.08 * s)]
            })
            .collect();
        for r in 0..side {
            for c in 0..side {
                let (py, px) = (r as f64 + 0.5, c as f64 + 0.5);
                let v = segs
                    .iter()
                    .map(|&[y0, x0, y1, x1, width]| {
                        let (dy, dx) = (y1 - y0, x1 - x0);
                        let len2 = dy * dy + dx * dx;
                        let t = if len2 > 0.0 { (((py - y0) * dy + (px - x0) * dx) / len2).clamp(0.0, 1.0) } else { 0.0 };
                        let (ey, ex) = (py - y0 - t * dy, px - x0 - t * dx);
                        let d2 = ey * ey + ex * ex;
                        (-d2 / (2.0 * width * width)).exp()
                    })
                    .fold(0.0, f64::max);
                out[(r * side + c, j)] = v;
            }
        }
    }
    out
}
