use std::path::{Path, PathBuf};

use lcq_core::datasets::{
    gen_superres, gen_synthetic_classes, load_idx_raw, synthetic_images, LabeledImageSet, Split, SyntheticClassesConfig,
};
use lcq_core::models::checkpoint::ModelKind;
use lcq_core::models::{glorot_init, mlp_layout, LinearRegressionModel, LossModel, MlpModel, ModelError, Params};

use crate::config::{DataSource, RunConfig, Task};
use crate::error::CliError;

pub const DATA_DIR_ENV: &str = "LCQ_DATA_DIR";

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// A model ready for training or compression, with its starting weights.
pub enum Prepared {
    Regression(LinearRegressionModel),
    Mlp(MlpModel, Params),
}

impl Prepared {
    pub fn model(&self) -> &dyn LossModel {
        match self {
            Prepared::Regression(m) => m,
            Prepared::Mlp(m, _) => m,
        }
    }

    pub fn init(&self) -> Params {
        match self {
            Prepared::Regression(m) => Params::zeros(m.layout()),
            Prepared::Mlp(_, p) => p.clone(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Prepared::Regression(_) => ModelKind::LinearRegression,
            Prepared::Mlp(..) => ModelKind::Mlp,
        }
    }
}

fn data_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.data.dir.clone().or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

fn idx_files(dir: &Path) -> Option<[PathBuf; 4]> {
    let files = [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS].map(|f| dir.join(f));
    files.iter().all(|f| f.is_file()).then_some(files)
}

/// IDX files to use, or `None` for synthetic data.
fn resolve_idx(cfg: &RunConfig) -> Result<Option<[PathBuf; 4]>, CliError> {
    match cfg.data.source {
        DataSource::Synthetic => Ok(None),
        DataSource::Auto => Ok(data_dir(cfg).and_then(|d| idx_files(&d))),
        DataSource::Idx => {
            let dir = data_dir(cfg).ok_or_else(|| {
                CliError::Config(format!("data.source = \"idx\" needs data.dir or {DATA_DIR_ENV}"))
            })?;
            idx_files(&dir).map(Some).ok_or_else(|| {
                CliError::Io(format!("{} lacks the files {TRAIN_IMAGES}, {TRAIN_LABELS}, {TEST_IMAGES}, {TEST_LABELS}", dir.display()))
            })
        }
    }
}

fn head(set: LabeledImageSet, n: Option<usize>) -> Result<LabeledImageSet, CliError> {
    match n {
        Some(n) if n < set.len() => {
            Ok(LabeledImageSet::new(set.images.columns(0, n).into_owned(), set.labels[..n].to_vec(), set.split)?)
        }
        _ => Ok(set),
    }
}

/// Normalized classification data.
pub struct ClassData {
    pub train: LabeledImageSet,
    pub test: LabeledImageSet,
    pub n_classes: usize,
}

impl ClassData {
    /// An MLP with the given hidden widths and its initial weights.
    pub fn model(&self, cfg: &RunConfig, hidden: &[usize]) -> Result<(MlpModel, Params), ModelError> {
        let layout = mlp_layout(self.train.dim(), hidden, cfg.model.activation, self.n_classes);
        let init = glorot_init(&layout, cfg.seed.wrapping_add(2));
        let mut m = MlpModel::new(layout, self.train.images.clone(), self.train.labels.clone(), cfg.sgd_config())?
            .with_reference_epochs(cfg.model.reference_epochs);
        if !self.test.is_empty() {
            m = m.with_test(self.test.images.clone(), self.test.labels.clone())?;
        }
        Ok((m, init))
    }
}

/// Where the data comes from, for provenance.
pub fn describe_source(cfg: &RunConfig) -> Result<String, CliError> {
    Ok(match resolve_idx(cfg)? {
        Some(f) => format!("idx:{}", f[0].parent().unwrap_or(Path::new(".")).display()),
        None => "synthetic".to_string(),
    })
}

pub fn load_classes(cfg: &RunConfig) -> Result<ClassData, CliError> {
    let (mut train, mut test, n_classes) = match resolve_idx(cfg)? {
        Some(f) => {
            let train = head(load_idx_raw(&f[0], &f[1], Split::Train)?, cfg.n_samples())?;
            let test = load_idx_raw(&f[2], &f[3], Split::Test)?;
            let n = train.labels.iter().chain(&test.labels).map(|&l| usize::from(l) + 1).max().unwrap_or(2);
            (train, test, n.max(2))
        }
        None => {
            let set = gen_synthetic_classes(&SyntheticClassesConfig {
                n_classes: cfg.data.n_classes,
                dim: cfg.data.dim,
                n: cfg.n_samples().unwrap_or(12000),
                separation: cfg.data.separation,
                seed: cfg.seed,
            })?;
            let (train, test) = set.split(cfg.data.train_fraction, cfg.seed.wrapping_add(1))?;
            (train, test, cfg.data.n_classes)
        }
    };
    if train.is_empty() {
        return Err(CliError::Config("no training samples".into()));
    }
    let mean = train.pixel_mean();
    train.normalize(Some(&mean))?;
    test.normalize(Some(&mean))?;
    Ok(ClassData { train, test, n_classes })
}

pub fn load_regression(cfg: &RunConfig) -> Result<LinearRegressionModel, CliError> {
    let (images, side) = match resolve_idx(cfg)? {
        Some(f) => {
            let set = head(load_idx_raw(&f[0], &f[1], Split::Train)?, cfg.n_samples())?;
            let side = (set.dim() as f64).sqrt().round() as usize;
            if side * side != set.dim() {
                return Err(CliError::Io(format!("IDX images are not square ({} pixels)", set.dim())));
            }
            (set.images, side)
        }
        None => (synthetic_images(cfg.n_samples().unwrap_or(1000), cfg.data.side, cfg.seed), cfg.data.side),
    };
    let pairs = gen_superres(&images, side, cfg.data.noise_sigma, cfg.seed.wrapping_add(1))?;
    Ok(LinearRegressionModel::new(pairs.x, pairs.y)?)
}

/// The configured model and its starting weights.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    Ok(match cfg.task {
        Task::Regression => Prepared::Regression(load_regression(cfg)?),
        Task::MlpClassify => {
            let (m, init) = load_classes(cfg)?.model(cfg, &cfg.model.hidden)?;
            Prepared::Mlp(m, init)
        }
    })
}
