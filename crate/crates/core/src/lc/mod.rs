//! The LC outer loop and the direct-compression baselines.

mod scheme;
mod stats;
mod trace;

pub use scheme::{CStep, Compressor, QuantScheme, Quantizer};
pub use stats::{clipped_lr, compression_stats, compression_stats_groups, CompressionStats, DEFAULT_FLOAT_BITS};
pub use trace::{Trace, TraceRecord, TraceRow};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Evaluation, Layout, LossModel, ModelError, Params, Penalty};
use crate::quantizers::{QuantParams, QuantizeError};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LcError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("L step diverged at outer iteration {iter}")]
    Diverged { iter: usize, trace: Box<Trace> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMethod {
    AugmentedLagrangian,
    QuadraticPenalty,
}

/// `mu_k = mu0 * growth^k`, for `max_outer_iters` outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySchedule {
    pub mu0: f64,
    pub growth: f64,
    pub max_outer_iters: usize,
    pub method: PenaltyMethod,
}

impl PenaltySchedule {
    pub fn mlp_default() -> Self {
        Self { mu0: 9.76e-5, growth: 1.1, max_outer_iters: 30, method: PenaltyMethod::AugmentedLagrangian }
    }

    pub fn regression_default() -> Self {
        Self { mu0: 10.0, growth: 1.1, max_outer_iters: 30, method: PenaltyMethod::AugmentedLagrangian }
    }

    pub fn validate(&self) -> Result<(), LcError> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(LcError::InvalidConfig(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return Err(LcError::InvalidConfig(format!("growth must exceed 1, got {}", self.growth)));
        }
        if self.max_outer_iters == 0 {
            return Err(LcError::InvalidConfig("need at least one outer iteration".into()));
        }
        Ok(())
    }

    /// The values of mu used by iterations `1..=max_outer_iters`, each the
    /// previous one times `growth`.
    pub fn mus(&self) -> Vec<f64> {
        let mut mu = self.mu0;
        (0..self.max_outer_iters)
            .map(|_| {
                let m = mu;
                mu *= self.growth;
                m
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcConfig {
    pub schedule: PenaltySchedule,
    /// Stop once `max |w - decompressed| < tolerance`.
    pub tolerance: f64,
    /// Seeds k-means++ in the first C step.
    pub seed: u64,
}

/// Penalty parameter and multiplier estimates during an LC run.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    pub mu: f64,
    pub lambda: Vec<f64>,
    pub outer_iter: usize,
}

/// Observation points inside the LC loop, for diagnostics and tests.
pub trait LcHooks {
    /// Called right before the C step with the vector about to be quantized.
    fn c_step_input(&mut self, _state: &PenaltyState, _w: &[f64], _input: &[f64]) {}

    /// Called after each iteration's multiplier update.
    fn after_iteration(&mut self, _state: &PenaltyState, _c: &CStep) {}
}

pub struct NoHooks;

impl LcHooks for NoHooks {}

/// A quantized model: codebooks and indices per quantizable layer, and the
/// full parameter set with those weights decompressed.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub quant: Vec<QuantParams>,
    pub params: Params,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct LcOutcome {
    pub model: Compressed,
    pub trace: Trace,
    /// The tolerance was met; otherwise `model` is the iterate with the
    /// lowest quantized training loss.
    pub converged: bool,
    /// Outer iteration `model` comes from.
    pub selected_iter: usize,
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn with_weights(layout: &Layout, base: &Params, weights: &[f64]) -> Params {
    let mut p = base.clone();
    p.set_quantizable_weights(layout, weights);
    p
}

struct Recorder {
    start: Instant,
    trace: Trace,
}

impl Recorder {
    fn new(method: &str) -> Self {
        Self { start: Instant::now(), trace: Trace::new(method) }
    }

    #[allow(clippy::too_many_arguments)]
    fn push<M: LossModel + ?Sized>(
        &mut self,
        model: &M,
        iter: usize,
        mu: f64,
        w: &Params,
        wq: &[f64],
        c: &CStep,
    ) -> Result<(Params, Evaluation), LcError> {
        let quantized = with_weights(model.layout(), w, &c.decompressed);
        let evaluation = model.evaluate(&quantized);
        let loss_train_real = model.loss(w);
        self.trace.records.push(TraceRecord {
            outer_iter: iter,
            mu,
            loss_train: evaluation.loss_train,
            loss_test: evaluation.loss_test,
            err_train: evaluation.err_train,
            err_test: evaluation.err_test,
            constraint_violation: linf(wq, &c.decompressed),
            kmeans_iters: c.kmeans_iters,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            loss_train_real,
            distortion: c.distortion,
            codebooks: c.codebooks.clone(),
        });
        if !evaluation.loss_train.is_finite() || !loss_train_real.is_finite() {
            return Err(self.diverged(iter));
        }
        Ok((quantized, evaluation))
    }

    fn diverged(&self, iter: usize) -> LcError {
        LcError::Diverged { iter, trace: Box::new(self.trace.clone()) }
    }
}

fn check_reference<M: LossModel + ?Sized>(model: &M, reference: &Params) -> Result<(), LcError> {
    reference.check(model.layout())?;
    if !reference.is_finite() {
        return Err(LcError::InvalidConfig("reference parameters are not finite".into()));
    }
    Ok(())
}

/// Direct compression: one C step on the reference weights.
pub fn dc_run<M: LossModel + ?Sized>(
    model: &M,
    reference: &Params,
    scheme: &QuantScheme,
    seed: u64,
) -> Result<Compressed, LcError> {
    check_reference(model, reference)?;
    let layout = model.layout();
    let mut comp = Compressor::new(scheme, layout, seed)?;
    let c = comp.compress(&reference.quantizable_weights(layout))?;
    let params = with_weights(layout, reference, &c.decompressed);
    let evaluation = model.evaluate(&params);
    Ok(Compressed { quant: c.layers, params, evaluation })
}

/// Iterated direct compression: alternate unpenalized retraining, started
/// from the quantized net, and C steps.
pub fn idc_run<M: LossModel + ?Sized>(
    model: &M,
    reference: &Params,
    scheme: &QuantScheme,
    outer_iters: usize,
    seed: u64,
) -> Result<(Compressed, Trace), LcError> {
    check_reference(model, reference)?;
    let layout = model.layout();
    let mut comp = Compressor::new(scheme, layout, seed)?;
    let mut rec = Recorder::new("idc");

    let wq = reference.quantizable_weights(layout);
    let mut c = comp.compress(&wq)?;
    let (mut quantized, mut evaluation) = rec.push(model, 0, 0.0, reference, &wq, &c)?;
    for k in 1..=outer_iters {
        let w = match model.l_step(&quantized, None, k - 1) {
            Ok(w) => w,
            Err(ModelError::Diverged { .. }) => return Err(rec.diverged(k)),
            Err(e) => return Err(e.into()),
        };
        let wq = w.quantizable_weights(layout);
        c = comp.compress(&wq)?;
        (quantized, evaluation) = rec.push(model, k, 0.0, &w, &wq, &c)?;
    }
    Ok((Compressed { quant: c.layers, params: quantized, evaluation }, rec.trace))
}

/// The LC algorithm, started from trained reference weights.
///
/// Iteration 0 is the direct-compression point. Each later iteration runs an
/// L step towards `decompressed + lambda/mu`, a C step on `w - lambda/mu`
/// and, under the augmented Lagrangian, the multiplier update
/// `lambda -= mu (w - decompressed)`.
pub fn lc_run<M: LossModel + ?Sized>(
    model: &M,
    reference: &Params,
    scheme: &QuantScheme,
    config: &LcConfig,
    hooks: &mut dyn LcHooks,
) -> Result<LcOutcome, LcError> {
    config.schedule.validate()?;
    if !(config.tolerance > 0.0) {
        return Err(LcError::InvalidConfig(format!("tolerance must be positive, got {}", config.tolerance)));
    }
    check_reference(model, reference)?;
    let layout = model.layout();
    let mut comp = Compressor::new(scheme, layout, config.seed)?;
    let mut rec = Recorder::new(match config.schedule.method {
        PenaltyMethod::AugmentedLagrangian => "lc",
        PenaltyMethod::QuadraticPenalty => "lc_qp",
    });
    let augmented = config.schedule.method == PenaltyMethod::AugmentedLagrangian;

    let mut w = reference.clone();
    let mut wq = w.quantizable_weights(layout);
    let mut c = comp.compress(&wq)?;
    let (quantized, evaluation) = rec.push(model, 0, 0.0, &w, &wq, &c)?;
    let mut best = (Compressed { quant: c.layers.clone(), params: quantized, evaluation }, 0);

    let mut state = PenaltyState { mu: 0.0, lambda: vec![0.0; wq.len()], outer_iter: 0 };
    let mut converged = false;
    for (i, mu) in config.schedule.mus().into_iter().enumerate() {
        let k = i + 1;
        state.mu = mu;
        state.outer_iter = k;

        let target: Vec<f64> = c.decompressed.iter().zip(&state.lambda).map(|(d, l)| d + l / mu).collect();
        w = match model.l_step(&w, Some(Penalty { mu, target: &target }), i) {
            Ok(w) => w,
            Err(ModelError::Diverged { .. }) => return Err(rec.diverged(k)),
            Err(e) => return Err(e.into()),
        };
        wq = w.quantizable_weights(layout);

        let input: Vec<f64> = wq.iter().zip(&state.lambda).map(|(x, l)| x - l / mu).collect();
        hooks.c_step_input(&state, &wq, &input);
        c = comp.compress(&input)?;

        if augmented {
            for ((l, x), d) in state.lambda.iter_mut().zip(&wq).zip(&c.decompressed) {
                *l -= mu * (x - d);
            }
        }
        hooks.after_iteration(&state, &c);

        let (quantized, evaluation) = rec.push(model, k, mu, &w, &wq, &c)?;
        let violation = rec.trace.last().map_or(f64::INFINITY, |r| r.constraint_violation);
        let candidate = Compressed { quant: c.layers.clone(), params: quantized, evaluation };
        if violation < config.tolerance {
            best = (candidate, k);
            converged = true;
            break;
        }
        if evaluation.loss_train < best.0.evaluation.loss_train {
            best = (candidate, k);
        }
    }

    let (model_out, selected_iter) = best;
    Ok(LcOutcome { model: model_out, trace: rec.trace, converged, selected_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_grows_by_exact_factor() {
        let s = PenaltySchedule::mlp_default();
        let mus = s.mus();
        assert_eq!(mus.len(), 30);
        assert_eq!(mus[0], 9.76e-5);
        for p in mus.windows(2) {
            assert_eq!(p[1], p[0] * 1.1);
            assert!(p[1] > p[0]);
        }
    }

    #[test]
    fn schedule_validation() {
        let ok = PenaltySchedule::regression_default();
        assert!(ok.validate().is_ok());
        for bad in [
            PenaltySchedule { mu0: 0.0, ..ok },
            PenaltySchedule { growth: 1.0, ..ok },
            PenaltySchedule { max_outer_iters: 0, ..ok },
            PenaltySchedule { mu0: f64::NAN, ..ok },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
