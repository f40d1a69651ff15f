//! Brute-force reference solvers for the compression step.
//!
//! These exist to check the production quantizers and are deliberately naive:
//! exhaustive enumeration, linear scans and an `O(K P^2)` dynamic program.
//! Nothing here calls into [`crate::quantizers`].

use thiserror::Error;

pub const MAX_BINARY_P: usize = 16;
pub const MAX_TERNARY_P: usize = 10;
pub const MAX_DP_P: usize = 512;
pub const MAX_DP_K: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle refuses P = {p} (limit {limit})")]
    TooManyWeights { p: usize, limit: usize },
    #[error("oracle refuses K = {k} (limit {limit})")]
    TooManyClusters { k: usize, limit: usize },
    #[error("oracle needs at least one weight and one cluster")]
    Empty,
}

/// Global optimum of `sum_i (w_i - a theta_i)^2` found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFit {
    pub scale: f64,
    pub theta: Vec<i8>,
    pub objective: f64,
}

fn fit_for_pattern(w: &[f64], theta: &[i8]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &t) in w.iter().zip(theta) {
        num += x * f64::from(t);
        den += f64::from(t * t);
    }
    let a = if den > 0.0 { num / den } else { 0.0 };
    let obj = w
        .iter()
        .zip(theta)
        .map(|(&x, &t)| (x - a * f64::from(t)).powi(2))
        .sum();
    (a, obj)
}

fn enumerate(w: &[f64], symbols: &[i8]) -> ScaledFit {
    let base = symbols.len();
    let total = base.pow(w.len() as u32);
    let mut best = ScaledFit { scale: 0.0, theta: Vec::new(), objective: f64::INFINITY };
    let mut theta = vec![symbols[0]; w.len()];
    for code in 0..total {
        let mut c = code;
        for t in theta.iter_mut() {
            *t = symbols[c % base];
            c /= base;
        }
        let (a, obj) = fit_for_pattern(w, &theta);
        if obj < best.objective {
            best = ScaledFit { scale: a, theta: theta.clone(), objective: obj };
        }
    }
    best
}

/// Enumerates all `2^P` sign patterns, each with its least-squares scale.
pub fn brute_binarize_scale(w: &[f64]) -> Result<ScaledFit, OracleError> {
    if w.len() > MAX_BINARY_P {
        return Err(OracleError::TooManyWeights { p: w.len(), limit: MAX_BINARY_P });
    }
    Ok(enumerate(w, &[-1, 1]))
}

/// Enumerates all `3^P` ternary patterns, each with its least-squares scale.
pub fn brute_ternarize_scale(w: &[f64]) -> Result<ScaledFit, OracleError> {
    if w.len() > MAX_TERNARY_P {
        return Err(OracleError::TooManyWeights { p: w.len(), limit: MAX_TERNARY_P });
    }
    Ok(enumerate(w, &[-1, 0, 1]))
}

/// Linear-scan nearest entry of `scale * codebook` for every weight. The
/// first minimizer wins on ties.
pub fn brute_nearest(w: &[f64], codebook: &[f64], scale: f64) -> Vec<usize> {
    w.iter()
        .map(|&x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &c) in codebook.iter().enumerate() {
                let d = (x - scale * c).powi(2);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Exact 1-D k-means by dynamic programming over contiguous runs of the
/// sorted weights. Returns the optimal centroids (at most `k`, increasing)
/// and the optimal squared distortion.
pub fn kmeans_1d_dp(w: &[f64], k: usize) -> Result<(Vec<f64>, f64), OracleError> {
    if w.is_empty() || k == 0 {
        return Err(OracleError::Empty);
    }
    if w.len() > MAX_DP_P {
        return Err(OracleError::TooManyWeights { p: w.len(), limit: MAX_DP_P });
    }
    if k > MAX_DP_K {
        return Err(OracleError::TooManyClusters { k, limit: MAX_DP_K });
    }
    let mut x = w.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let k = k.min(n);

    // centre first to keep the prefix-sum cost formula well conditioned
    let shift = x.iter().sum::<f64>() / n as f64;
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &v) in x.iter().enumerate() {
        let v = v - shift;
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let cost = |i: usize, j: usize| -> f64 {
        let m = (j - i) as f64;
        let s = s1[j] - s1[i];
        (s2[j] - s2[i] - s * s / m).max(0.0)
    };

    // best[m][j]: optimal cost of the first j points split into m runs
    let mut best = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut split = vec![vec![0usize; n + 1]; k + 1];
    best[0][0] = 0.0;
    for m in 1..=k {
        for j in m..=n {
            for i in (m - 1)..j {
                let c = best[m - 1][i] + cost(i, j);
                if c < best[m][j] {
                    best[m][j] = c;
                    split[m][j] = i;
                }
            }
        }
    }

    let mut bounds = Vec::with_capacity(k);
    let mut j = n;
    for m in (1..=k).rev() {
        let i = split[m][j];
        bounds.push((i, j));
        j = i;
    }
    bounds.reverse();

    let mut centers = Vec::with_capacity(k);
    let mut total = 0.0;
    for (i, j) in bounds {
        let run = &x[i..j];
        let mean = run.iter().sum::<f64>() / run.len() as f64;
        total += run.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        centers.push(mean);
    }
    centers.dedup();
    Ok((centers, total))
}
