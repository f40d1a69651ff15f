use std::path::{Path, PathBuf};

use lcq_core::lc::{LcConfig, PenaltyMethod, PenaltySchedule, QuantScheme, Quantizer, DEFAULT_TOLERANCE};
use lcq_core::models::{Activation, Layout, LrSchedule, MomentumKind, SgdConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    #[default]
    MlpClassify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dc,
    Idc,
    #[default]
    Lc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dc => "dc",
            Method::Idc => "idc",
            Method::Lc => "lc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// IDX files if the data directory has them, synthetic data otherwise.
    #[default]
    Auto,
    Idx,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory with the four MNIST IDX files; falls back to `LCQ_DATA_DIR`.
    pub dir: Option<PathBuf>,
    /// Sample count. Synthetic defaults: 12000 for classification, 1000 for
    /// regression. For IDX files, caps the training samples used.
    pub n: Option<usize>,
    pub n_classes: usize,
    pub dim: usize,
    pub separation: f64,
    /// Share of synthetic samples used for training; the rest is the test set.
    pub train_fraction: f64,
    /// High-resolution side of the regression images.
    pub side: usize,
    pub noise_sigma: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Auto,
            dir: None,
            n: None,
            n_classes: 10,
            dim: 20,
            separation: 4.0,
            train_fraction: 5.0 / 6.0,
            side: 28,
            noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub reference_epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![40], activation: Activation::Tanh, reference_epochs: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSection {
    pub lr: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub momentum_kind: MomentumKind,
    pub batch_size: usize,
    /// Epochs per L step.
    pub epochs: usize,
}

impl Default for SgdSection {
    fn default() -> Self {
        let d = SgdConfig::default();
        Self {
            lr: d.lr.initial,
            lr_decay: d.lr.decay,
            momentum: d.momentum,
            momentum_kind: d.momentum_kind,
            batch_size: d.batch_size,
            epochs: d.epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub method: Method,
    /// `adaptive`, `binary`, `binary_scale`, `ternary`, `ternary_scale`,
    /// `pow2:<c_exp>` or `fixed:<v1>,<v2>,...`
    pub scheme: String,
    /// Codebook size for `adaptive`.
    pub k: usize,
    /// One codebook for all layers instead of one per layer.
    pub shared: bool,
    pub mu0: Option<f64>,
    pub growth: Option<f64>,
    pub iters: Option<usize>,
    pub penalty: PenaltyMethod,
    pub tolerance: f64,
    pub float_bits: u32,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            method: Method::Lc,
            scheme: "adaptive".into(),
            k: 2,
            shared: false,
            mu0: None,
            growth: None,
            iters: None,
            penalty: PenaltyMethod::AugmentedLagrangian,
            tolerance: DEFAULT_TOLERANCE,
            float_bits: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub hidden: Vec<usize>,
    pub log2_k: Vec<u32>,
    /// Also report the uncompressed net of every width.
    pub include_reference: bool,
    /// Loss targets for operational points; empty means every distinct
    /// loss found in the grid.
    pub targets: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { hidden: (2..=16).collect(), log2_k: vec![1, 2, 3, 4], include_reference: true, targets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub sgd: SgdSection,
    pub compress: CompressConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::MlpClassify,
            seed: 1,
            out: PathBuf::from("lcq-out"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            sgd: SgdSection::default(),
            compress: CompressConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scheme: Option<String>,
    pub k: Option<usize>,
    pub mu0: Option<f64>,
    pub growth: Option<f64>,
    pub iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub method: Option<Method>,
}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

/// Parses a quantizer name; `k` is used by `adaptive`.
pub fn parse_quantizer(spec: &str, k: usize) -> Result<Quantizer, CliError> {
    Ok(Quantizer::parse(spec, k)?)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(s) = &o.scheme {
            self.compress.scheme = s.clone();
        }
        if let Some(k) = o.k {
            self.compress.k = k;
        }
        if let Some(m) = o.mu0 {
            self.compress.mu0 = Some(m);
        }
        if let Some(g) = o.growth {
            self.compress.growth = Some(g);
        }
        if let Some(i) = o.iters {
            self.compress.iters = Some(i);
        }
        if let Some(t) = o.tolerance {
            self.compress.tolerance = t;
        }
        if let Some(m) = o.method {
            self.compress.method = m;
        }
    }

    /// Sample count after task defaults.
    pub fn n_samples(&self) -> Option<usize> {
        match (self.data.n, self.data.source) {
            (Some(n), _) => Some(n),
            (None, _) if self.task == Task::Regression => Some(1000),
            (None, DataSource::Idx) => None,
            (None, _) => Some(12000),
        }
    }

    pub fn sgd_config(&self) -> SgdConfig {
        SgdConfig {
            lr: LrSchedule { initial: self.sgd.lr, decay: self.sgd.lr_decay },
            momentum: self.sgd.momentum,
            momentum_kind: self.sgd.momentum_kind,
            batch_size: self.sgd.batch_size,
            epochs: self.sgd.epochs,
            seed: self.seed.wrapping_add(3),
        }
    }

    pub fn schedule(&self) -> PenaltySchedule {
        let base = match self.task {
            Task::Regression => PenaltySchedule::regression_default(),
            Task::MlpClassify => PenaltySchedule::mlp_default(),
        };
        PenaltySchedule {
            mu0: self.compress.mu0.unwrap_or(base.mu0),
            growth: self.compress.growth.unwrap_or(base.growth),
            max_outer_iters: self.compress.iters.unwrap_or(base.max_outer_iters),
            method: self.compress.penalty,
        }
    }

    pub fn lc_config(&self) -> LcConfig {
        LcConfig { schedule: self.schedule(), tolerance: self.compress.tolerance, seed: self.seed }
    }

    pub fn quantizer(&self) -> Result<Quantizer, CliError> {
        parse_quantizer(&self.compress.scheme, self.compress.k)
    }

    pub fn scheme(&self, layout: &Layout) -> Result<QuantScheme, CliError> {
        let q = self.quantizer()?;
        Ok(if self.compress.shared {
            QuantScheme::Global(q)
        } else {
            QuantScheme::per_layer(q, layout.quantizable_ranges().len())
        })
    }

    /// Checks every value before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.data;
        if self.n_samples() == Some(0) {
            return Err(config_err("data.n must be positive"));
        }
        if !(2..=256).contains(&d.n_classes) {
            return Err(config_err("data.n_classes must lie in 2..=256"));
        }
        if d.dim == 0 {
            return Err(config_err("data.dim must be positive"));
        }
        if !(d.separation.is_finite() && d.separation >= 0.0) {
            return Err(config_err("data.separation must be finite and nonnegative"));
        }
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(config_err("data.train_fraction must lie strictly between 0 and 1"));
        }
        if d.side == 0 || d.side % 2 != 0 {
            return Err(config_err("data.side must be even and positive"));
        }
        if !(d.noise_sigma.is_finite() && d.noise_sigma >= 0.0) {
            return Err(config_err("data.noise_sigma must be finite and nonnegative"));
        }
        if self.model.hidden.contains(&0) {
            return Err(config_err("model.hidden widths must be positive"));
        }
        if self.model.activation == Activation::Softmax {
            return Err(config_err("softmax is reserved for the output layer"));
        }
        self.sgd_config().validate()?;
        self.schedule().validate()?;
        self.quantizer()?;
        if !(self.compress.tolerance > 0.0) {
            return Err(config_err("compress.tolerance must be positive"));
        }
        if !(1..=64).contains(&self.compress.float_bits) {
            return Err(config_err("compress.float_bits must lie in 1..=64"));
        }
        let s = &self.sweep;
        if s.hidden.is_empty() || s.hidden.contains(&0) {
            return Err(config_err("sweep.hidden must list positive widths"));
        }
        if s.log2_k.is_empty() && !s.include_reference {
            return Err(config_err("sweep grid is empty"));
        }
        if s.log2_k.iter().any(|&m| m == 0 || m > 16) {
            return Err(config_err("sweep.log2_k entries must lie in 1..=16"));
        }
        if s.targets.iter().any(|t| t.is_nan()) {
            return Err(config_err("sweep.targets must be numbers"));
        }
        Ok(())
    }
}
