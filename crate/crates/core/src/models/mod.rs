//! Loss models that the LC driver trains: each exposes its loss, an exact
//! minibatch gradient and a solver for the penalized learning step
//! `min_w L(w) + mu/2 ||w - target||^2`.
//!
//! Only multiplicative weights of layers flagged `quantizable` are
//! penalized; biases never are.

pub mod checkpoint;
mod linear;
mod mlp;
mod sgd;

pub use linear::LinearRegressionModel;
pub use mlp::{glorot_init, mlp_layout, MlpModel};
pub use sgd::{LrSchedule, MomentumKind, SgdConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("penalized normal equations are not positive definite (mu = {mu})")]
    Singular { mu: f64 },
    #[error("training diverged (non-finite parameters) during L step {step}")]
    Diverged { step: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Softmax,
}

/// Shape of one fully connected layer: `rows x cols` weights (outputs by
/// inputs, row-major) and `rows` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub quantizable: bool,
}

impl LayerShape {
    pub fn n_weights(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerShape>,
}

impl Layout {
    pub fn new(layers: Vec<LayerShape>) -> Self {
        Self { layers }
    }

    /// Number of quantizable multiplicative weights (`P1`).
    pub fn n_quantizable(&self) -> usize {
        self.layers.iter().filter(|l| l.quantizable).map(LayerShape::n_weights).sum()
    }

    /// Number of weights and biases that stay in floating point (`P0`).
    pub fn n_unquantized(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.rows + if l.quantizable { 0 } else { l.n_weights() })
            .sum()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.n_weights() + l.rows).sum()
    }

    /// `(layer index, range in the quantizable vector)` per quantizable layer.
    pub fn quantizable_ranges(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        let mut start = 0;
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.quantizable)
            .map(|(i, l)| {
                let r = start..start + l.n_weights();
                start = r.end;
                (i, r)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<LayerParams>,
}

impl Params {
    pub fn zeros(layout: &Layout) -> Self {
        let layers = layout
            .layers
            .iter()
            .map(|l| LayerParams { weights: vec![0.0; l.n_weights()], bias: vec![0.0; l.rows] })
            .collect();
        Self { layers }
    }

    pub fn check(&self, layout: &Layout) -> Result<(), ModelError> {
        if self.layers.len() != layout.layers.len() {
            return Err(ModelError::LayoutMismatch(format!(
                "{} layers, expected {}",
                self.layers.len(),
                layout.layers.len()
            )));
        }
        for (i, (p, s)) in self.layers.iter().zip(&layout.layers).enumerate() {
            if p.weights.len() != s.n_weights() || p.bias.len() != s.rows {
                return Err(ModelError::LayoutMismatch(format!(
                    "layer {i}: {} weights / {} biases, expected {}x{} / {}",
                    p.weights.len(),
                    p.bias.len(),
                    s.rows,
                    s.cols,
                    s.rows
                )));
            }
        }
        Ok(())
    }

    /// Concatenated weights of the quantizable layers.
    pub fn quantizable_weights(&self, layout: &Layout) -> Vec<f64> {
        self.layers
            .iter()
            .zip(&layout.layers)
            .filter(|(_, s)| s.quantizable)
            .flat_map(|(p, _)| p.weights.iter().copied())
            .collect()
    }

    pub fn set_quantizable_weights(&mut self, layout: &Layout, flat: &[f64]) {
        assert_eq!(flat.len(), layout.n_quantizable(), "quantizable vector length");
        for (i, r) in layout.quantizable_ranges() {
            self.layers[i].weights.copy_from_slice(&flat[r]);
        }
    }

    /// Every parameter: per layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn unflatten(layout: &Layout, flat: &[f64]) -> Result<Self, ModelError> {
        if flat.len() != layout.n_params() {
            return Err(ModelError::LayoutMismatch(format!(
                "{} parameters, expected {}",
                flat.len(),
                layout.n_params()
            )));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let v = flat[at..at + n].to_vec();
            at += n;
            v
        };
        let layers = layout
            .layers
            .iter()
            .map(|s| {
                let weights = take(s.n_weights());
                let bias = take(s.rows);
                LayerParams { weights, bias }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }
}

/// Quadratic pull `mu/2 ||w_q - target||^2` on the quantizable weights.
#[derive(Debug, Clone, Copy)]
pub struct Penalty<'a> {
    pub mu: f64,
    pub target: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss_train: f64,
    pub loss_test: Option<f64>,
    /// Classification error in percent.
    pub err_train: Option<f64>,
    pub err_test: Option<f64>,
}

pub trait LossModel {
    fn layout(&self) -> &Layout;

    fn n_train(&self) -> usize;

    /// Average training loss.
    fn loss(&self, params: &Params) -> f64;

    fn evaluate(&self, params: &Params) -> Evaluation;

    /// Exact gradient of the average loss over the training points in `batch`.
    fn gradient(&self, params: &Params, batch: &[usize]) -> Params;

    /// Approximately (SGD) or exactly (closed form) minimizes the loss plus
    /// the optional penalty, starting from `init`. `step` is the outer
    /// iteration index, used for learning-rate schedules and seeding.
    fn l_step(
        &self,
        init: &Params,
        penalty: Option<Penalty<'_>>,
        step: usize,
    ) -> Result<Params, ModelError>;

    /// Trains the uncompressed reference net from `init`.
    fn fit_reference(&self, init: &Params) -> Result<Params, ModelError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> Layout {
        Layout::new(vec![
            LayerShape { rows: 3, cols: 4, activation: Activation::Tanh, quantizable: true },
            LayerShape { rows: 2, cols: 3, activation: Activation::Softmax, quantizable: true },
        ])
    }

    #[test]
    fn counts() {
        let l = layout();
        assert_eq!(l.n_quantizable(), 18);
        assert_eq!(l.n_unquantized(), 5);
        assert_eq!(l.n_params(), 23);
        let r: Vec<_> = l.quantizable_ranges();
        assert_eq!(r, vec![(0, 0..12), (1, 12..18)]);
    }

    #[test]
    fn unflatten_rejects_wrong_length() {
        assert!(matches!(Params::unflatten(&layout(), &[0.0; 5]), Err(ModelError::LayoutMismatch(_))));
    }

    proptest! {
        #[test]
        fn flatten_round_trip(v in proptest::collection::vec(-1e3f64..1e3, 23)) {
            let l = layout();
            let p = Params::unflatten(&l, &v).unwrap();
            p.check(&l).unwrap();
            prop_assert_eq!(p.flatten(), v);
            let q = p.quantizable_weights(&l);
            let mut p2 = Params::zeros(&l);
            p2.set_quantizable_weights(&l, &q);
            prop_assert_eq!(p2.quantizable_weights(&l), q);
        }
    }
}
