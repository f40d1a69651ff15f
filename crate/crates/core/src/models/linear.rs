use nalgebra::{DMatrix, DVector};

use super::{Activation, Evaluation, LayerParams, LayerShape, Layout, LossModel, ModelError, Params, Penalty};

/// `L(W, b) = (1/N) sum_n ||y_n - W x_n - b||^2` with a closed-form L step.
///
/// The bias is eliminated by centring, so each L step is one symmetric
/// positive definite solve of size `d_in` shared by all output rows.
#[derive(Debug, Clone)]
pub struct LinearRegressionModel {
    layout: Layout,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    x_mean: DVector<f64>,
    y_mean: DVector<f64>,
    /// `(2/N) Xc Xc^T`
    gram: DMatrix<f64>,
    /// `(2/N) Xc Yc^T`, i.e. the transposed cross term.
    cross_t: DMatrix<f64>,
}

impl LinearRegressionModel {
    /// `x` is `d_in x N`, `y` is `d_out x N`.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = x.ncols();
        if n == 0 || y.ncols() != n {
            return Err(ModelError::InvalidConfig(format!(
                "need matching nonempty sample counts, got {} inputs and {} targets",
                n,
                y.ncols()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidConfig("data contains non-finite values".into()));
        }
        let layout = Layout::new(vec![LayerShape {
            rows: y.nrows(),
            cols: x.nrows(),
            activation: Activation::Identity,
            quantizable: true,
        }]);
        let x_mean = x.column_mean();
        let y_mean = y.column_mean();
        let mut xc = x.clone();
        for mut c in xc.column_iter_mut() {
            c -= &x_mean;
        }
        let mut yc = y.clone();
        for mut c in yc.column_iter_mut() {
            c -= &y_mean;
        }
        let s = 2.0 / n as f64;
        let gram = &xc * xc.transpose() * s;
        let cross_t = &xc * yc.transpose() * s;
        Ok(Self { layout, x, y, x_mean, y_mean, gram, cross_t })
    }

    pub fn d_in(&self) -> usize {
        self.x.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.y.nrows()
    }

    fn unpack(&self, p: &Params) -> (DMatrix<f64>, DVector<f64>) {
        let l = &p.layers[0];
        (
            DMatrix::from_row_slice(self.d_out(), self.d_in(), &l.weights),
            DVector::from_column_slice(&l.bias),
        )
    }

    fn residual(&self, p: &Params, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        let (w, b) = self.unpack(p);
        let mut r = y - w * x;
        for mut c in r.column_iter_mut() {
            c -= &b;
        }
        r
    }
}

impl LossModel for LinearRegressionModel {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn n_train(&self) -> usize {
        self.x.ncols()
    }

    fn loss(&self, params: &Params) -> f64 {
        self.residual(params, &self.x, &self.y).norm_squared() / self.n_train() as f64
    }

    fn evaluate(&self, params: &Params) -> Evaluation {
        Evaluation { loss_train: self.loss(params), ..Evaluation::default() }
    }

    fn gradient(&self, params: &Params, batch: &[usize]) -> Params {
        let xb = self.x.select_columns(batch);
        let yb = self.y.select_columns(batch);
        let r = self.residual(params, &xb, &yb);
        let s = -2.0 / batch.len() as f64;
        // (r xb^T)^T in column-major order is r xb^T in row-major order
        let gw_t = &xb * r.transpose() * s;
        let gb = r.column_sum() * s;
        Params {
            layers: vec![LayerParams {
                weights: gw_t.as_slice().to_vec(),
                bias: gb.as_slice().to_vec(),
            }],
        }
    }

    fn l_step(
        &self,
        init: &Params,
        penalty: Option<Penalty<'_>>,
        _step: usize,
    ) -> Result<Params, ModelError> {
        init.check(&self.layout)?;
        let (d_in, d_out) = (self.d_in(), self.d_out());
        let mu = penalty.map_or(0.0, |p| p.mu);
        let mut a = self.gram.clone();
        for i in 0..d_in {
            a[(i, i)] += mu;
        }
        let mut rhs = self.cross_t.clone();
        if let Some(p) = penalty {
            if p.target.len() != d_in * d_out {
                return Err(ModelError::LayoutMismatch(format!(
                    "penalty target has {} entries, expected {}",
                    p.target.len(),
                    d_in * d_out
                )));
            }
            // row-major W target read column-major is its transpose
            rhs += DMatrix::from_column_slice(d_in, d_out, p.target) * p.mu;
        }
        let chol = a.cholesky().ok_or(ModelError::Singular { mu })?;
        let w_t = chol.solve(&rhs);
        let weights = w_t.as_slice().to_vec();
        let bias = &self.y_mean - w_t.transpose() * &self.x_mean;
        let out = Params { layers: vec![LayerParams { weights, bias: bias.as_slice().to_vec() }] };
        if !out.is_finite() {
            return Err(ModelError::Singular { mu });
        }
        Ok(out)
    }

    fn fit_reference(&self, init: &Params) -> Result<Params, ModelError> {
        self.l_step(init, None, 0)
    }
}
