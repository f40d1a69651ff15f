//! Neural network weight quantization by the learning-compression (LC)
//! algorithm.
//!
//! Training a quantized net is posed as `min L(w) s.t. w = decompress(theta)`
//! and solved with a penalty / augmented-Lagrangian path that alternates
//!
//! * an **L step**, `min_w L(w) + mu/2 ||w - decompress(theta) - lambda/mu||^2`,
//!   handled by a [`models::LossModel`], and
//! * a **C step**, `theta = quantize(w - lambda/mu)`, handled by
//!   [`quantizers`] (k-means for adaptive codebooks, closed forms for fixed
//!   ones),
//!
//! while `mu` grows geometrically. [`lc`] drives the loop and also provides
//! the direct-compression baselines.

pub mod oracles;
pub mod quantizers;
pub mod datasets;
pub mod lc;
pub mod models;
pub mod sweep;
