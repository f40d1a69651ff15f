//! Python bindings: quantizers, models, the DC / iDC / LC drivers,
//! checkpoints and the synthetic datasets.
//!
//! Data crosses the boundary as plain lists. Matrices of samples are lists of
//! rows, one row per sample.

use std::path::PathBuf;

use lcq_core::datasets::{downscale as core_downscale, gen_superres, gen_synthetic_classes, synthetic_images, DatasetError, SyntheticClassesConfig};
use lcq_core::lc::{
    self, Compressed as CoreCompressed, CompressionStats as CoreStats, Compressor, LcConfig, LcError, NoHooks, PenaltyMethod,
    PenaltySchedule, QuantScheme, Quantizer, DEFAULT_TOLERANCE,
};
use lcq_core::models::checkpoint::{Checkpoint as CoreCheckpoint, CheckpointError, ModelKind};
use lcq_core::models::{
    glorot_init, mlp_layout, Activation, LayerParams, LayerShape, Layout, LinearRegressionModel, LossModel, LrSchedule,
    MlpModel, ModelError, Params as CoreParams, SgdConfig,
};
use lcq_core::quantizers::{self as q, decompress, KMeansInit, QuantParams as CoreQuant, QuantizeError};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model_err(e: ModelError) -> PyErr {
    match e {
        ModelError::Singular { .. } | ModelError::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn quant_err(e: QuantizeError) -> PyErr {
    match e {
        QuantizeError::NonFinite => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn lc_err(e: LcError) -> PyErr {
    match e {
        LcError::InvalidConfig(_) => value_err(e),
        LcError::Quantize(e) => quant_err(e),
        LcError::Model(e) => model_err(e),
        LcError::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn dataset_err(e: DatasetError) -> PyErr {
    match e {
        DatasetError::InvalidConfig(_) | DatasetError::OddSide(_) => value_err(e),
        _ => PyIOError::new_err(e.to_string()),
    }
}

fn checkpoint_err(e: CheckpointError) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Serializable value as plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Rows of samples to a `dim x n` matrix.
fn columns(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(value_err(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn labels_u8(labels: &[usize]) -> PyResult<Vec<u8>> {
    labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| value_err(format!("label {l} exceeds 255"))))
        .collect()
}

fn scheme_for(layout: &Layout, scheme: &str, k: usize, shared: bool) -> PyResult<QuantScheme> {
    let q = Quantizer::parse(scheme, k).map_err(lc_err)?;
    let s = if shared { QuantScheme::Global(q) } else { QuantScheme::per_layer(q, layout.quantizable_ranges().len()) };
    s.validate(layout).map_err(lc_err)?;
    Ok(s)
}

/// Codebook and per-weight indices of one quantized group.
#[pyclass(name = "QuantParams", module = "lcquant", frozen)]
pub struct PyQuantParams {
    inner: CoreQuant,
}

#[pymethods]
impl PyQuantParams {
    /// Stored codebook entries (unscaled for scaled codebooks).
    #[getter]
    fn codebook(&self) -> Vec<f64> {
        self.inner.codebook().entries().to_vec()
    }

    #[getter]
    fn scale(&self) -> Option<f64> {
        self.inner.codebook().scale()
    }

    /// The values weights can take.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.codebook().values()
    }

    #[getter]
    fn assignments(&self) -> Vec<u32> {
        self.inner.assignments().indices().to_vec()
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.codebook().kind()).to_lowercase()
    }

    fn decompress(&self) -> Vec<f64> {
        decompress(&self.inner)
    }

    /// Squared error against `w`.
    fn distortion(&self, w: Vec<f64>) -> PyResult<f64> {
        if w.len() != self.inner.len() {
            return Err(value_err(format!("expected {} weights, got {}", self.inner.len(), w.len())));
        }
        Ok(self.inner.distortion(&w))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("QuantParams(values={:?}, n={})", self.values(), self.inner.len())
    }
}

fn wrap_quant(inner: CoreQuant) -> PyQuantParams {
    PyQuantParams { inner }
}

/// Adaptive codebook of size `k` by k-means. Starts from `init` when given,
/// else from k-means++ seeded with `seed`. Returns the quantization, its
/// distortion and the number of iterations.
#[pyfunction]
#[pyo3(signature = (w, k, seed = 0, init = None))]
fn kmeans(py: Python<'_>, w: Vec<f64>, k: usize, seed: u64, init: Option<Vec<f64>>) -> PyResult<(PyQuantParams, f64, usize)> {
    let init = match init {
        Some(c) => KMeansInit::Warm(c),
        None => KMeansInit::PlusPlus { seed },
    };
    let r = py.detach(|| q::kmeans_1d(&w, k, init)).map_err(quant_err)?;
    Ok((wrap_quant(r.params), r.distortion, r.iterations))
}

#[pyfunction]
fn binarize(w: Vec<f64>) -> PyQuantParams {
    wrap_quant(q::binarize(&w))
}

#[pyfunction]
fn binarize_scale(w: Vec<f64>) -> PyResult<PyQuantParams> {
    q::binarize_scale(&w).map(wrap_quant).map_err(quant_err)
}

#[pyfunction]
fn ternarize(w: Vec<f64>) -> PyQuantParams {
    wrap_quant(q::ternarize(&w))
}

#[pyfunction]
fn ternarize_scale(w: Vec<f64>) -> PyResult<PyQuantParams> {
    q::ternarize_scale(&w).map(wrap_quant).map_err(quant_err)
}

/// Nearest value in `{0, +-1, +-1/2, ..., +-2^-c_exp}`.
#[pyfunction]
fn pow2_quantize(w: Vec<f64>, c_exp: u32) -> PyResult<PyQuantParams> {
    Quantizer::Pow2 { c_exp }.validate().map_err(lc_err)?;
    Ok(wrap_quant(q::pow2_quantize(&w, c_exp)))
}

/// One compression step on a flat weight vector with a scheme string such as
/// `adaptive`, `binary_scale`, `pow2:5` or `fixed:-1,0,1`.
#[pyfunction]
#[pyo3(signature = (w, scheme = "adaptive", k = 2, seed = 0))]
fn quantize(py: Python<'_>, w: Vec<f64>, scheme: &str, k: usize, seed: u64) -> PyResult<PyQuantParams> {
    let layout =
        Layout::new(vec![LayerShape { rows: 1, cols: w.len(), activation: Activation::Identity, quantizable: true }]);
    let s = QuantScheme::Global(Quantizer::parse(scheme, k).map_err(lc_err)?);
    let mut c = py.detach(|| Compressor::new(&s, &layout, seed)?.compress(&w)).map_err(lc_err)?;
    Ok(wrap_quant(c.layers.remove(0)))
}

/// Storage of the reference and the quantized net, in bits.
#[pyclass(name = "CompressionStats", module = "lcquant", frozen, get_all)]
pub struct PyStats {
    p1: u64,
    p0: u64,
    k: usize,
    n_codebooks: usize,
    float_bits: u32,
    bits_reference: u64,
    bits_quantized: u64,
    rho: f64,
}

impl From<CoreStats> for PyStats {
    fn from(s: CoreStats) -> Self {
        Self {
            p1: s.p1,
            p0: s.p0,
            k: s.k,
            n_codebooks: s.n_codebooks,
            float_bits: s.float_bits,
            bits_reference: s.bits_reference,
            bits_quantized: s.bits_quantized,
            rho: s.rho,
        }
    }
}

#[pymethods]
impl PyStats {
    fn __repr__(&self) -> String {
        format!(
            "CompressionStats(p1={}, p0={}, k={}, bits_reference={}, bits_quantized={}, rho={:.3})",
            self.p1, self.p0, self.k, self.bits_reference, self.bits_quantized, self.rho
        )
    }
}

/// `p1` weights sharing one codebook of `k` entries, `p0` floats kept as is.
#[pyfunction]
#[pyo3(signature = (p1, p0, k, float_bits = 32))]
fn compression_stats(p1: u64, p0: u64, k: usize, float_bits: u32) -> PyResult<PyStats> {
    if float_bits == 0 {
        return Err(value_err("float_bits must be positive"));
    }
    Ok(lc::compression_stats(p1, p0, k, float_bits).into())
}

/// Weights and biases of every layer.
#[pyclass(name = "Params", module = "lcquant", frozen)]
pub struct PyParams {
    inner: CoreParams,
}

#[pymethods]
impl PyParams {
    /// `[(weights, bias), ...]` with weights row-major, outputs by inputs.
    #[new]
    fn new(layers: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let layers = layers.into_iter().map(|(weights, bias)| LayerParams { weights, bias }).collect();
        Self { inner: CoreParams { layers } }
    }

    #[getter]
    fn layers(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.inner.layers.iter().map(|l| (l.weights.clone(), l.bias.clone())).collect()
    }

    fn flatten(&self) -> Vec<f64> {
        self.inner.flatten()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Params({} layers, {} values)", self.inner.layers.len(), self.inner.flatten().len())
    }
}

fn wrap_params(inner: CoreParams) -> PyParams {
    PyParams { inner }
}

enum Inner {
    Regression(LinearRegressionModel),
    Mlp(MlpModel),
}

/// A loss model with its training data: linear regression or an MLP
/// classifier.
#[pyclass(name = "Model", module = "lcquant", frozen)]
pub struct PyModel {
    inner: Inner,
    init: CoreParams,
}

impl PyModel {
    fn loss_model(&self) -> &dyn LossModel {
        match &self.inner {
            Inner::Regression(m) => m,
            Inner::Mlp(m) => m,
        }
    }

    fn kind(&self) -> ModelKind {
        match self.inner {
            Inner::Regression(_) => ModelKind::LinearRegression,
            Inner::Mlp(_) => ModelKind::Mlp,
        }
    }

    fn default_schedule(&self) -> PenaltySchedule {
        match self.inner {
            Inner::Regression(_) => PenaltySchedule::regression_default(),
            Inner::Mlp(_) => PenaltySchedule::mlp_default(),
        }
    }

    fn checked(&self, p: &PyParams) -> PyResult<CoreParams> {
        p.inner.check(self.loss_model().layout()).map_err(model_err)?;
        Ok(p.inner.clone())
    }
}

fn parse_activation(name: &str) -> PyResult<Activation> {
    match name {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        "identity" => Ok(Activation::Identity),
        other => Err(value_err(format!("unknown hidden activation `{other}`"))),
    }
}

#[pymethods]
impl PyModel {
    /// Least squares from inputs `x` to targets `y`, both one row per sample.
    #[staticmethod]
    fn regression(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = LinearRegressionModel::new(columns(&x, "x")?, columns(&y, "y")?).map_err(model_err)?;
        let init = CoreParams::zeros(m.layout());
        Ok(Self { inner: Inner::Regression(m), init })
    }

    /// Fully connected classifier with a softmax output, trained by SGD.
    #[staticmethod]
    #[pyo3(signature = (
        x, labels, hidden, activation = "tanh", n_classes = None, test_x = None, test_labels = None,
        lr = 0.1, lr_decay = 0.99, momentum = 0.95, batch_size = 128, epochs = 2, reference_epochs = 20, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn mlp(
        x: Vec<Vec<f64>>,
        labels: Vec<usize>,
        hidden: Vec<usize>,
        activation: &str,
        n_classes: Option<usize>,
        test_x: Option<Vec<Vec<f64>>>,
        test_labels: Option<Vec<usize>>,
        lr: f64,
        lr_decay: f64,
        momentum: f64,
        batch_size: usize,
        epochs: usize,
        reference_epochs: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let x = columns(&x, "x")?;
        let labels = labels_u8(&labels)?;
        let classes = n_classes.unwrap_or_else(|| labels.iter().map(|&l| usize::from(l) + 1).max().unwrap_or(2).max(2));
        let layout = mlp_layout(x.nrows(), &hidden, parse_activation(activation)?, classes);
        let sgd = SgdConfig {
            lr: LrSchedule { initial: lr, decay: lr_decay },
            momentum,
            batch_size,
            epochs,
            seed: seed.wrapping_add(1),
            ..SgdConfig::default()
        };
        let init = glorot_init(&layout, seed);
        let mut m = MlpModel::new(layout, x, labels, sgd).map_err(model_err)?.with_reference_epochs(reference_epochs);
        match (test_x, test_labels) {
            (Some(tx), Some(tl)) => m = m.with_test(columns(&tx, "test_x")?, labels_u8(&tl)?).map_err(model_err)?,
            (None, None) => {}
            _ => return Err(value_err("give both test_x and test_labels or neither")),
        }
        Ok(Self { inner: Inner::Mlp(m), init })
    }

    /// `"linear_regression"` or `"mlp"`.
    #[getter(kind)]
    fn kind_name(&self) -> &'static str {
        match self.kind() {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::Mlp => "mlp",
        }
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.loss_model().layout().n_params()
    }

    /// Weights that get quantized.
    #[getter]
    fn n_quantizable(&self) -> usize {
        self.loss_model().layout().n_quantizable()
    }

    /// Weights and biases kept in floating point.
    #[getter]
    fn n_unquantized(&self) -> usize {
        self.loss_model().layout().n_unquantized()
    }

    /// `(rows, cols)` of each layer's weight matrix.
    #[getter]
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.loss_model().layout().layers.iter().map(|l| (l.rows, l.cols)).collect()
    }

    /// Starting point: Glorot initialization for MLPs, zeros for regression.
    fn initial_params(&self) -> PyParams {
        wrap_params(self.init.clone())
    }

    /// Trains the uncompressed reference model.
    #[pyo3(signature = (init = None))]
    fn fit_reference(&self, py: Python<'_>, init: Option<PyRef<'_, PyParams>>) -> PyResult<PyParams> {
        let init = match init {
            Some(p) => self.checked(&p)?,
            None => self.init.clone(),
        };
        py.detach(|| self.loss_model().fit_reference(&init)).map(wrap_params).map_err(model_err)
    }

    fn loss(&self, params: PyRef<'_, PyParams>) -> PyResult<f64> {
        Ok(self.loss_model().loss(&self.checked(&params)?))
    }

    /// Losses and, for classifiers, error rates in percent.
    fn evaluate<'py>(&self, py: Python<'py>, params: PyRef<'_, PyParams>) -> PyResult<Bound<'py, PyAny>> {
        let e = self.loss_model().evaluate(&self.checked(&params)?);
        to_py(py, &e)
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, layers={:?})", self.kind_name(), self.layer_shapes())
    }
}

/// A quantized model: one `QuantParams` per quantized group plus the full
/// parameters with quantized weights.
#[pyclass(name = "Compressed", module = "lcquant", frozen)]
pub struct PyCompressed {
    inner: CoreCompressed,
    scheme: QuantScheme,
    layout: Layout,
    kind: ModelKind,
}

#[pymethods]
impl PyCompressed {
    #[getter]
    fn params(&self) -> PyParams {
        wrap_params(self.inner.params.clone())
    }

    #[getter]
    fn quant(&self) -> Vec<PyQuantParams> {
        self.inner.quant.iter().cloned().map(wrap_quant).collect()
    }

    #[getter]
    fn evaluation<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.evaluation)
    }

    #[pyo3(signature = (float_bits = 32))]
    fn stats(&self, float_bits: u32) -> PyResult<PyStats> {
        if float_bits == 0 {
            return Err(value_err("float_bits must be positive"));
        }
        Ok(self.scheme.stats(&self.layout, &self.inner.quant, float_bits).into())
    }

    fn __repr__(&self) -> String {
        format!("Compressed(groups={}, loss_train={:.6})", self.inner.quant.len(), self.inner.evaluation.loss_train)
    }
}

/// Outcome of an LC run.
#[pyclass(name = "LcResult", module = "lcquant", frozen)]
pub struct PyLcResult {
    #[pyo3(get)]
    compressed: Py<PyCompressed>,
    /// One dict per outer iteration, iteration 0 being direct compression.
    #[pyo3(get)]
    trace: Py<PyList>,
    #[pyo3(get)]
    converged: bool,
    /// Iteration the returned model comes from.
    #[pyo3(get)]
    selected_iter: usize,
}

fn trace_list<'py>(py: Python<'py>, trace: &lc::Trace) -> PyResult<Bound<'py, PyList>> {
    Ok(to_py(py, &trace.records)?.cast_into::<PyList>()?)
}

fn wrap_compressed(model: &PyModel, inner: CoreCompressed, scheme: QuantScheme) -> PyCompressed {
    PyCompressed { inner, scheme, layout: model.loss_model().layout().clone(), kind: model.kind() }
}

/// Direct compression: quantize the reference weights.
#[pyfunction]
#[pyo3(signature = (model, reference, scheme = "adaptive", k = 2, shared = false, seed = 0))]
fn dc(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    reference: PyRef<'_, PyParams>,
    scheme: &str,
    k: usize,
    shared: bool,
    seed: u64,
) -> PyResult<PyCompressed> {
    let reference = model.checked(&reference)?;
    let s = scheme_for(model.loss_model().layout(), scheme, k, shared)?;
    let m: &PyModel = &model;
    let c = py.detach(|| lc::dc_run(m.loss_model(), &reference, &s, seed)).map_err(lc_err)?;
    Ok(wrap_compressed(m, c, s))
}

/// Iterated direct compression: retrain from the quantized weights and
/// quantize again, `iters` times. Returns the last model and the trace.
#[pyfunction]
#[pyo3(signature = (model, reference, iters = 30, scheme = "adaptive", k = 2, shared = false, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn idc<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    reference: PyRef<'_, PyParams>,
    iters: usize,
    scheme: &str,
    k: usize,
    shared: bool,
    seed: u64,
) -> PyResult<(PyCompressed, Bound<'py, PyList>)> {
    let reference = model.checked(&reference)?;
    let s = scheme_for(model.loss_model().layout(), scheme, k, shared)?;
    let m: &PyModel = &model;
    let (c, trace) = py.detach(|| lc::idc_run(m.loss_model(), &reference, &s, iters, seed)).map_err(lc_err)?;
    Ok((wrap_compressed(m, c, s), trace_list(py, &trace)?))
}

/// The LC algorithm from trained reference weights. Schedule values left
/// out come from the model's default; `penalty` is `"al"` (augmented
/// Lagrangian) or `"qp"` (quadratic penalty).
#[pyfunction]
#[pyo3(name = "lc", signature = (
    model, reference, scheme = "adaptive", k = 2, shared = false,
    mu0 = None, growth = None, iters = None, penalty = "al", tolerance = DEFAULT_TOLERANCE, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn run_lc(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    reference: PyRef<'_, PyParams>,
    scheme: &str,
    k: usize,
    shared: bool,
    mu0: Option<f64>,
    growth: Option<f64>,
    iters: Option<usize>,
    penalty: &str,
    tolerance: f64,
    seed: u64,
) -> PyResult<PyLcResult> {
    let reference = model.checked(&reference)?;
    let s = scheme_for(model.loss_model().layout(), scheme, k, shared)?;
    let d = model.default_schedule();
    let method = match penalty {
        "al" => PenaltyMethod::AugmentedLagrangian,
        "qp" => PenaltyMethod::QuadraticPenalty,
        other => return Err(value_err(format!("penalty must be \"al\" or \"qp\", got `{other}`"))),
    };
    let config = LcConfig {
        schedule: PenaltySchedule {
            mu0: mu0.unwrap_or(d.mu0),
            growth: growth.unwrap_or(d.growth),
            max_outer_iters: iters.unwrap_or(d.max_outer_iters),
            method,
        },
        tolerance,
        seed,
    };
    let m: &PyModel = &model;
    let out = py.detach(|| lc::lc_run(m.loss_model(), &reference, &s, &config, &mut NoHooks)).map_err(lc_err)?;
    Ok(PyLcResult {
        compressed: Py::new(py, wrap_compressed(m, out.model, s))?,
        trace: trace_list(py, &out.trace)?.unbind(),
        converged: out.converged,
        selected_iter: out.selected_iter,
    })
}

/// A model stored in the binary checkpoint format.
#[pyclass(name = "Checkpoint", module = "lcquant", frozen)]
pub struct PyCheckpoint {
    inner: CoreCheckpoint,
}

#[pymethods]
impl PyCheckpoint {
    /// Uncompressed parameters of `model`.
    #[staticmethod]
    fn from_params(model: PyRef<'_, PyModel>, params: PyRef<'_, PyParams>) -> PyResult<Self> {
        let params = model.checked(&params)?;
        Ok(Self { inner: CoreCheckpoint::unquantized(model.kind(), model.loss_model().layout().clone(), params) })
    }

    #[staticmethod]
    fn from_compressed(c: PyRef<'_, PyCompressed>) -> PyResult<Self> {
        let quant = match &c.scheme {
            QuantScheme::PerLayer(_) => c.inner.quant.clone(),
            QuantScheme::Global(_) => {
                return Err(value_err("a shared codebook cannot be stored per layer; use a per-layer scheme"));
            }
        };
        CoreCheckpoint::quantized(c.kind, c.layout.clone(), c.inner.params.clone(), quant)
            .map(|inner| Self { inner })
            .map_err(checkpoint_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CoreCheckpoint::load(&path).map(|inner| Self { inner }).map_err(checkpoint_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(checkpoint_err)
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        let mut buf = Vec::new();
        self.inner.write_to(&mut buf).map_err(checkpoint_err)?;
        Ok(buf)
    }

    #[staticmethod]
    fn from_bytes(data: Vec<u8>) -> PyResult<Self> {
        CoreCheckpoint::read_from(data.as_slice()).map(|inner| Self { inner }).map_err(checkpoint_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::Mlp => "mlp",
        }
    }

    #[getter]
    fn params(&self) -> PyParams {
        wrap_params(self.inner.params.clone())
    }

    /// Per layer, its quantization or `None`.
    #[getter]
    fn quant(&self) -> Vec<Option<PyQuantParams>> {
        self.inner.quant.iter().map(|q| q.clone().map(wrap_quant)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Checkpoint(kind={}, layers={})", self.kind(), self.inner.layout.layers.len())
    }
}

/// Gaussian class clusters: `(x, labels)` with one row of `x` per sample.
#[pyfunction]
#[pyo3(signature = (n, n_classes = 10, dim = 20, separation = 4.0, seed = 0))]
fn synthetic_classes(n: usize, n_classes: usize, dim: usize, separation: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<u8>)> {
    let set = gen_synthetic_classes(&SyntheticClassesConfig { n_classes, dim, n, separation, seed }).map_err(dataset_err)?;
    Ok((rows(&set.images), set.labels))
}

/// Super-resolution pairs from synthetic stroke images: `(x, y)` with
/// downscaled noisy inputs and full-size targets, one row per sample.
#[pyfunction]
#[pyo3(signature = (n, side = 28, noise_sigma = 0.05, seed = 0))]
fn superres_pairs(n: usize, side: usize, noise_sigma: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let images = synthetic_images(n, side, seed);
    let p = gen_superres(&images, side, noise_sigma, seed.wrapping_add(1)).map_err(dataset_err)?;
    Ok((rows(&p.x), rows(&p.y)))
}

/// Halves a row-major `side x side` image.
#[pyfunction]
fn downscale(img: Vec<f64>, side: usize) -> PyResult<Vec<f64>> {
    core_downscale(&img, side).map_err(dataset_err)
}

/// Adds the module's classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantParams>()?;
    m.add_class::<PyStats>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCompressed>()?;
    m.add_class::<PyLcResult>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(binarize, m)?)?;
    m.add_function(wrap_pyfunction!(binarize_scale, m)?)?;
    m.add_function(wrap_pyfunction!(ternarize, m)?)?;
    m.add_function(wrap_pyfunction!(ternarize_scale, m)?)?;
    m.add_function(wrap_pyfunction!(pow2_quantize, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(compression_stats, m)?)?;
    m.add_function(wrap_pyfunction!(dc, m)?)?;
    m.add_function(wrap_pyfunction!(idc, m)?)?;
    m.add_function(wrap_pyfunction!(run_lc, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_classes, m)?)?;
    m.add_function(wrap_pyfunction!(superres_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(downscale, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[pymodule]
fn lcquant(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
