use serde::{Deserialize, Serialize};

use super::ModelError;

/// `eta_t = initial * decay^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
}

impl LrSchedule {
    pub fn rate(&self, t: usize) -> f64 {
        self.initial * self.decay.powi(t as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumKind {
    Classical,
    Nesterov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub lr: LrSchedule,
    pub momentum: f64,
    pub momentum_kind: MomentumKind,
    pub batch_size: usize,
    /// Passes over the training set per L step.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: LrSchedule { initial: 0.1, decay: 0.99 },
            momentum: 0.95,
            momentum_kind: MomentumKind::Nesterov,
            batch_size: 128,
            epochs: 2,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.lr.initial > 0.0 && self.lr.initial.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lr.decay > 0.0 && self.lr.decay.is_finite()) {
            return bad("learning-rate decay must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("minibatch size must be at least 1");
        }
        Ok(())
    }
}

/// Stream seed for L step `step`, so that every step shuffles differently
/// but reproducibly.
pub(crate) fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
