use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sgd::step_seed;
use super::{
    Activation, Evaluation, LayerParams, LayerShape, Layout, LossModel, ModelError, MomentumKind,
    Params, Penalty, SgdConfig,
};
use crate::lc::clipped_lr;

/// Columns per chunk when evaluating the whole data set.
const EVAL_CHUNK: usize = 2048;

/// Fully connected classifier with a softmax output and average
/// cross-entropy loss, trained by minibatch SGD with momentum.
#[derive(Debug, Clone)]
pub struct MlpModel {
    layout: Layout,
    n_classes: usize,
    x: DMatrix<f64>,
    labels: Vec<u8>,
    test: Option<(DMatrix<f64>, Vec<u8>)>,
    sgd: SgdConfig,
    reference_epochs: usize,
}

/// Layout of an `input -> hidden... -> classes` network with every weight
/// matrix quantizable.
pub fn mlp_layout(input: usize, hidden: &[usize], activation: Activation, classes: usize) -> Layout {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut cols = input;
    for &h in hidden {
        layers.push(LayerShape { rows: h, cols, activation, quantizable: true });
        cols = h;
    }
    layers.push(LayerShape { rows: classes, cols, activation: Activation::Softmax, quantizable: true });
    Layout::new(layers)
}

/// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
pub fn glorot_init(layout: &Layout, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layout
        .layers
        .iter()
        .map(|s| {
            let r = (6.0 / (s.rows + s.cols) as f64).sqrt();
            LayerParams {
                weights: (0..s.n_weights()).map(|_| rng.random_range(-r..r)).collect(),
                bias: vec![0.0; s.rows],
            }
        })
        .collect();
    Params { layers }
}

fn check_labels(labels: &[u8], n: usize, classes: usize) -> Result<(), ModelError> {
    if labels.len() != n {
        return Err(ModelError::InvalidConfig(format!("{} labels for {n} samples", labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(ModelError::InvalidConfig(format!("label {l} out of range for {classes} classes")));
    }
    Ok(())
}

fn activate(z: &mut DMatrix<f64>, act: Activation) {
    match act {
        Activation::Identity => {}
        Activation::Tanh => z.apply(|v| *v = v.tanh()),
        Activation::Relu => z.apply(|v| *v = v.max(0.0)),
        Activation::Softmax => {
            for mut c in z.column_iter_mut() {
                let m = c.max();
                c.apply(|v| *v = (*v - m).exp());
                let s = c.sum();
                c /= s;
            }
        }
    }
}

/// Per-sample cross-entropy from logits, via log-sum-exp.
fn cross_entropy(logits: &DMatrix<f64>, labels: &[u8]) -> f64 {
    logits
        .column_iter()
        .zip(labels)
        .map(|(c, &y)| {
            let m = c.max();
            let lse = m + c.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - c[y as usize]
        })
        .sum()
}

impl MlpModel {
    /// `x` is `d x N` with one sample per column.
    pub fn new(
        layout: Layout,
        x: DMatrix<f64>,
        labels: Vec<u8>,
        sgd: SgdConfig,
    ) -> Result<Self, ModelError> {
        sgd.validate()?;
        let Some(last) = layout.layers.last() else {
            return Err(ModelError::InvalidConfig("network has no layers".into()));
        };
        if last.activation != Activation::Softmax {
            return Err(ModelError::InvalidConfig("output layer must be softmax".into()));
        }
        let mut cols = x.nrows();
        for (i, s) in layout.layers.iter().enumerate() {
            if s.cols != cols || s.rows == 0 {
                return Err(ModelError::LayoutMismatch(format!(
                    "layer {i} is {}x{}, expected {cols} inputs",
                    s.rows, s.cols
                )));
            }
            if i + 1 < layout.layers.len() && s.activation == Activation::Softmax {
                return Err(ModelError::InvalidConfig("softmax is only allowed at the output".into()));
            }
            cols = s.rows;
        }
        let n_classes = last.rows;
        if x.ncols() == 0 {
            return Err(ModelError::InvalidConfig("no training samples".into()));
        }
        check_labels(&labels, x.ncols(), n_classes)?;
        Ok(Self { layout, n_classes, x, labels, test: None, sgd, reference_epochs: 20 })
    }

    pub fn with_test(mut self, x: DMatrix<f64>, labels: Vec<u8>) -> Result<Self, ModelError> {
        if x.nrows() != self.x.nrows() {
            return Err(ModelError::LayoutMismatch(format!(
                "test inputs have dimension {}, expected {}",
                x.nrows(),
                self.x.nrows()
            )));
        }
        check_labels(&labels, x.ncols(), self.n_classes)?;
        self.test = Some((x, labels));
        Ok(self)
    }

    pub fn with_reference_epochs(mut self, epochs: usize) -> Self {
        self.reference_epochs = epochs;
        self
    }

    pub fn sgd(&self) -> &SgdConfig {
        &self.sgd
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn matrices(&self, p: &Params) -> Vec<DMatrix<f64>> {
        self.layout
            .layers
            .iter()
            .zip(&p.layers)
            .map(|(s, l)| DMatrix::from_row_slice(s.rows, s.cols, &l.weights))
            .collect()
    }

    /// Post-activation outputs of every layer; the last entry holds logits
    /// when `logits` is set, else class probabilities.
    fn forward(&self, mats: &[DMatrix<f64>], p: &Params, x: &DMatrix<f64>, logits: bool) -> Vec<DMatrix<f64>> {
        let mut outs: Vec<DMatrix<f64>> = Vec::with_capacity(mats.len());
        for (i, (w, s)) in mats.iter().zip(&self.layout.layers).enumerate() {
            let input = if i == 0 { x } else { &outs[i - 1] };
            let mut z = w * input;
            for mut c in z.column_iter_mut() {
                for (v, b) in c.iter_mut().zip(&p.layers[i].bias) {
                    *v += b;
                }
            }
            if !(logits && s.activation == Activation::Softmax) {
                activate(&mut z, s.activation);
            }
            outs.push(z);
        }
        outs
    }

    /// Class probabilities, one column per sample of `x`.
    pub fn predict_proba(&self, params: &Params, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mats = self.matrices(params);
        self.forward(&mats, params, x, false).pop().expect("at least one layer")
    }

    /// Summed cross-entropy and number of misclassified samples.
    fn totals(&self, params: &Params, x: &DMatrix<f64>, labels: &[u8]) -> (f64, usize) {
        let mats = self.matrices(params);
        let mut loss = 0.0;
        let mut wrong = 0;
        let n = x.ncols();
        let mut start = 0;
        while start < n {
            let len = EVAL_CHUNK.min(n - start);
            let xb = x.columns(start, len).into_owned();
            let yb = &labels[start..start + len];
            let out = self.forward(&mats, params, &xb, true).pop().expect("at least one layer");
            loss += cross_entropy(&out, yb);
            wrong += out
                .column_iter()
                .zip(yb)
                .filter(|(c, &y)| c.argmax().0 != y as usize)
                .count();
            start += len;
        }
        (loss, wrong)
    }

    /// Average cross-entropy of an arbitrary labelled set.
    pub fn loss_on(&self, params: &Params, x: &DMatrix<f64>, labels: &[u8]) -> f64 {
        self.totals(params, x, labels).0 / x.ncols() as f64
    }

    fn sgd_epochs(
        &self,
        init: &Params,
        penalty: Option<Penalty<'_>>,
        lr: f64,
        epochs: usize,
        seed: u64,
        step: usize,
    ) -> Result<Params, ModelError> {
        init.check(&self.layout)?;
        if let Some(p) = penalty {
            if p.target.len() != self.layout.n_quantizable() {
                return Err(ModelError::LayoutMismatch(format!(
                    "penalty target has {} entries, expected {}",
                    p.target.len(),
                    self.layout.n_quantizable()
                )));
            }
        }
        let ranges = self.layout.quantizable_ranges();
        let m = self.sgd.momentum;
        let nesterov = self.sgd.momentum_kind == MomentumKind::Nesterov;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.n_train()).collect();
        let mut p = init.clone();
        let mut vel = Params::zeros(&self.layout);
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(self.sgd.batch_size) {
                let mut g = self.gradient(&p, batch);
                if let Some(pen) = penalty {
                    for (li, r) in &ranges {
                        let t = &pen.target[r.clone()];
                        for ((gi, wi), ti) in g.layers[*li].weights.iter_mut().zip(&p.layers[*li].weights).zip(t) {
                            *gi += pen.mu * (wi - ti);
                        }
                    }
                }
                for ((pl, vl), gl) in p.layers.iter_mut().zip(&mut vel.layers).zip(&g.layers) {
                    let params = pl.weights.iter_mut().chain(pl.bias.iter_mut());
                    let vs = vl.weights.iter_mut().chain(vl.bias.iter_mut());
                    let gs = gl.weights.iter().chain(&gl.bias);
                    for ((w, v), &gv) in params.zip(vs).zip(gs) {
                        *v = m * *v - lr * gv;
                        *w += if nesterov { m * *v - lr * gv } else { *v };
                    }
                }
            }
            if !p.is_finite() {
                return Err(ModelError::Diverged { step });
            }
        }
        Ok(p)
    }
}

impl LossModel for MlpModel {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn n_train(&self) -> usize {
        self.x.ncols()
    }

    fn loss(&self, params: &Params) -> f64 {
        self.loss_on(params, &self.x, &self.labels)
    }

    fn evaluate(&self, params: &Params) -> Evaluation {
        let n = self.n_train() as f64;
        let (loss, wrong) = self.totals(params, &self.x, &self.labels);
        let mut e = Evaluation {
            loss_train: loss / n,
            err_train: Some(100.0 * wrong as f64 / n),
            ..Evaluation::default()
        };
        if let Some((x, y)) = &self.test {
            let nt = x.ncols() as f64;
            let (loss, wrong) = self.totals(params, x, y);
            e.loss_test = Some(loss / nt);
            e.err_test = Some(100.0 * wrong as f64 / nt);
        }
        e
    }

    fn gradient(&self, params: &Params, batch: &[usize]) -> Params {
        let mats = self.matrices(params);
        let xb = self.x.select_columns(batch);
        let outs = self.forward(&mats, params, &xb, false);
        let n_layers = mats.len();

        // softmax + cross-entropy: dL/dz = p - onehot
        let mut delta = outs[n_layers - 1].clone();
        for (mut c, &i) in delta.column_iter_mut().zip(batch) {
            c[self.labels[i] as usize] -= 1.0;
        }
        delta /= batch.len() as f64;

        let mut grads: Vec<LayerParams> = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let input = if l == 0 { &xb } else { &outs[l - 1] };
            // input * delta^T is the row-major layout of delta * input^T
            let gw_t = input * delta.transpose();
            let gb = delta.column_sum();
            if l > 0 {
                let mut next = mats[l].transpose() * &delta;
                let a = &outs[l - 1];
                match self.layout.layers[l - 1].activation {
                    Activation::Tanh => next.zip_apply(a, |d, a| *d *= 1.0 - a * a),
                    Activation::Relu => next.zip_apply(a, |d, a| {
                        if a <= 0.0 {
                            *d = 0.0
                        }
                    }),
                    Activation::Identity | Activation::Softmax => {}
                }
                delta = next;
            }
            grads.push(LayerParams { weights: gw_t.as_slice().to_vec(), bias: gb.as_slice().to_vec() });
        }
        grads.reverse();
        Params { layers: grads }
    }

    fn l_step(
        &self,
        init: &Params,
        penalty: Option<Penalty<'_>>,
        step: usize,
    ) -> Result<Params, ModelError> {
        let lr = match penalty {
            Some(p) if p.mu > 0.0 => clipped_lr(step, &self.sgd.lr, p.mu),
            _ => self.sgd.lr.rate(step),
        };
        self.sgd_epochs(init, penalty, lr, self.sgd.epochs, step_seed(self.sgd.seed, step), step)
    }

    fn fit_reference(&self, init: &Params) -> Result<Params, ModelError> {
        let mut p = init.clone();
        let seed = !self.sgd.seed;
        for e in 0..self.reference_epochs {
            p = self.sgd_epochs(&p, None, self.sgd.lr.rate(e), 1, step_seed(seed, e), e)?;
        }
        Ok(p)
    }
}
