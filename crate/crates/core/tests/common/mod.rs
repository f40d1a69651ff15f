#![allow(dead_code)]

use lcq_core::datasets::{gen_superres, gen_synthetic_classes, synthetic_images, SyntheticClassesConfig};
use lcq_core::lc::{PenaltyMethod, PenaltySchedule};
use lcq_core::models::{
    glorot_init, mlp_layout, Activation, LinearRegressionModel, LossModel, LrSchedule, MlpModel, MomentumKind, Params,
    SgdConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn superres_model(n: usize, side: usize, sigma: f64, seed: u64) -> LinearRegressionModel {
    let imgs = synthetic_images(n, side, seed);
    let data = gen_superres(&imgs, side, sigma, seed + 1).unwrap();
    LinearRegressionModel::new(data.x, data.y).unwrap()
}

pub fn random_regression(d_in: usize, d_out: usize, n: usize, seed: u64) -> LinearRegressionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(d_in, n, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(d_out, n, |_, _| rng.random_range(-1.0..1.0));
    LinearRegressionModel::new(x, y).unwrap()
}

pub fn reference_of<M: LossModel>(m: &M, init: &Params) -> Params {
    m.fit_reference(init).unwrap()
}

pub fn sgd(epochs: usize, seed: u64) -> SgdConfig {
    SgdConfig {
        lr: LrSchedule { initial: 0.1, decay: 0.99 },
        momentum: 0.95,
        momentum_kind: MomentumKind::Nesterov,
        batch_size: 128,
        epochs,
        seed,
    }
}

/// Blob classification task split 5:1 into train and test, normalized with
/// the training mean.
pub fn blob_mlp(
    data: SyntheticClassesConfig,
    hidden: &[usize],
    sgd: SgdConfig,
    reference_epochs: usize,
) -> (MlpModel, Params) {
    let set = gen_synthetic_classes(&data).unwrap();
    let (mut train, mut test) = set.split(5.0 / 6.0, data.seed + 1).unwrap();
    let mean = train.pixel_mean();
    train.normalize(Some(&mean)).unwrap();
    test.normalize(Some(&mean)).unwrap();
    let layout = mlp_layout(data.dim, hidden, Activation::Tanh, data.n_classes);
    let init = glorot_init(&layout, data.seed + 2);
    let m = MlpModel::new(layout, train.images, train.labels, sgd)
        .unwrap()
        .with_test(test.images, test.labels)
        .unwrap()
        .with_reference_epochs(reference_epochs);
    (m, init)
}

/// The desk-scale classification setup used for the K = 2 comparison.
pub fn desk_classifier(seed: u64) -> (MlpModel, Params) {
    blob_mlp(
        SyntheticClassesConfig { n_classes: 10, dim: 20, n: 12000, separation: 4.0, seed },
        &[40],
        sgd(2, seed + 3),
        30,
    )
}

pub fn desk_schedule() -> PenaltySchedule {
    PenaltySchedule { mu0: 1e-3, growth: 1.25, max_outer_iters: 40, method: PenaltyMethod::AugmentedLagrangian }
}

pub fn distinct(v: &[f64]) -> usize {
    let mut s: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
    s.sort_unstable();
    s.dedup();
    s.len()
}
