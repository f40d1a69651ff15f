//! Fixed codebooks: binary, ternary, powers of two, and the same codebooks
//! with a learned global scale.

use super::{check_weights, nearest_sorted, Codebook, QuantParams, QuantizeError};

#[inline]
fn sgn(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `q(t) = sgn(t)` with `sgn(0) = +1`, codebook `{-1, +1}`.
pub fn binarize(w: &[f64]) -> QuantParams {
    let kappa = w.iter().map(|&t| u32::from(t >= 0.0)).collect();
    QuantParams::from_parts(Codebook::binary(), kappa, false)
}

/// Exact minimizer of `sum_i (w_i - a theta_i)^2` over `a` and
/// `theta in {-1,+1}^P`: `a = mean |w_i|`, `theta = sgn(w)`.
///
/// An all-zero input yields `a = 0` and a result flagged degenerate.
pub fn binarize_scale(w: &[f64]) -> Result<QuantParams, QuantizeError> {
    check_weights(w)?;
    let a = w.iter().map(|x| x.abs()).sum::<f64>() / w.len() as f64;
    let kappa = w.iter().map(|&t| u32::from(t >= 0.0)).collect();
    if a > 0.0 {
        let cb = Codebook::fixed_with_scale(vec![-1.0, 1.0], a)?;
        Ok(QuantParams::from_parts(cb, kappa, false))
    } else {
        Ok(QuantParams::from_parts(Codebook::zero_scaled(vec![-1.0, 1.0]), kappa, true))
    }
}

#[inline]
fn ternary_index(t: f64, half: f64) -> u32 {
    if t.abs() < half {
        1
    } else if t >= 0.0 {
        2
    } else {
        0
    }
}

/// `q(t) = 0` if `|t| < 1/2`, else `sgn(t)`; codebook `{-1, 0, +1}`.
pub fn ternarize(w: &[f64]) -> QuantParams {
    let kappa = w.iter().map(|&t| ternary_index(t, 0.5)).collect();
    QuantParams::from_parts(Codebook::ternary(), kappa, false)
}

/// Exact minimizer of `sum_i (w_i - a theta_i)^2` over `a` and
/// `theta in {-1,0,+1}^P`.
///
/// With magnitudes sorted decreasingly, the support size is
/// `j* = argmax_j (1/sqrt j) sum_{i<=j} |w_i|` and `a` is the mean magnitude of
/// the `j*` largest weights. Weights with `|w_i| >= a/2` keep their sign, the
/// rest go to 0. `O(P log P)`, dominated by the sort.
pub fn ternarize_scale(w: &[f64]) -> Result<QuantParams, QuantizeError> {
    check_weights(w)?;
    let mut mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut best_j = 1;
    let mut best_stat = f64::NEG_INFINITY;
    let mut best_sum = 0.0;
    let mut prefix = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        prefix += m;
        let stat = prefix / ((j + 1) as f64).sqrt();
        if stat > best_stat {
            best_stat = stat;
            best_j = j + 1;
            best_sum = prefix;
        }
    }
    let a = best_sum / best_j as f64;
    if a > 0.0 {
        let kappa = w.iter().map(|&t| ternary_index(t, 0.5 * a)).collect();
        let cb = Codebook::fixed_with_scale(vec![-1.0, 0.0, 1.0], a)?;
        Ok(QuantParams::from_parts(cb, kappa, false))
    } else {
        let kappa = vec![1; w.len()];
        Ok(QuantParams::from_parts(Codebook::zero_scaled(vec![-1.0, 0.0, 1.0]), kappa, true))
    }
}

/// `{0, +-1, +-2^-1, ..., +-2^-c_exp}` sorted increasingly (`2 c_exp + 3` entries).
pub fn pow2_codebook(c_exp: u32) -> Codebook {
    let mut entries = Vec::with_capacity(2 * c_exp as usize + 3);
    entries.extend((0..=c_exp).map(|i| -(2f64).powi(-(i as i32))));
    entries.push(0.0);
    entries.extend((0..=c_exp).rev().map(|i| (2f64).powi(-(i as i32))));
    Codebook::fixed(entries).expect("powers of two are sorted")
}

/// Magnitude exponent of the optimal powers-of-two value for `t`, or `None`
/// when `t` rounds to 0. Constant time.
fn pow2_exponent(t: f64, c_exp: u32) -> Option<u32> {
    let f = -t.abs().log2();
    let c = f64::from(c_exp);
    if f > c + 1.0 {
        None
    } else if f <= 0.0 {
        Some(0)
    } else if f > c {
        Some(c_exp)
    } else {
        // f in (0, C]: the cell of 2^-i is |t| in (3*2^(-i-2), 3*2^(-i-1)]
        let i = (f + 1.5f64.log2()).floor() as u32;
        Some(i.min(c_exp))
    }
}

/// Optimal powers-of-two value for a single scalar.
pub fn pow2_value(t: f64, c_exp: u32) -> f64 {
    match pow2_exponent(t, c_exp) {
        None => 0.0,
        Some(i) => sgn(t) * (2f64).powi(-(i as i32)),
    }
}

/// Rounds each weight to `{0, +-1, +-2^-1, ..., +-2^-c_exp}`.
pub fn pow2_quantize(w: &[f64], c_exp: u32) -> QuantParams {
    let zero = c_exp + 1;
    let kappa = w
        .iter()
        .map(|&t| match pow2_exponent(t, c_exp) {
            None => zero,
            Some(i) if t >= 0.0 => 2 * c_exp + 2 - i,
            Some(i) => i,
        })
        .collect();
    QuantParams::from_parts(pow2_codebook(c_exp), kappa, false)
}

fn scaled_objective(w: &[f64], entries: &[f64], a: f64, kappa: &[u32]) -> f64 {
    w.iter()
        .zip(kappa)
        .map(|(&x, &k)| {
            let d = x - a * entries[k as usize];
            d * d
        })
        .sum()
}

/// Alternating optimization of a global scale for an arbitrary fixed
/// codebook: nearest-entry assignment against `a c`, then the least-squares
/// scale `a = sum w_i c_k(i) / sum c_k(i)^2`, until the assignments stop
/// changing or `max_iters` scale updates have run.
///
/// The initial scale is `mean |w_i| / mean |c_k|` over nonzero entries `c_k`.
/// Returns the fitted parameters and the objective after the first
/// assignment and after every scale update (nonincreasing).
pub fn fixed_scale_alternate(
    w: &[f64],
    codebook: &Codebook,
    max_iters: usize,
) -> Result<(QuantParams, Vec<f64>), QuantizeError> {
    check_weights(w)?;
    let entries = codebook.entries().to_vec();
    let nonzero: Vec<f64> = entries.iter().filter(|&&c| c != 0.0).map(|c| c.abs()).collect();
    let mean_w = w.iter().map(|x| x.abs()).sum::<f64>() / w.len() as f64;

    if nonzero.is_empty() || mean_w == 0.0 {
        let zero = entries
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k as u32)
            .unwrap_or(0);
        let kappa = vec![zero; w.len()];
        let objective = scaled_objective(w, &entries, 0.0, &kappa);
        return Ok((QuantParams::from_parts(Codebook::zero_scaled(entries), kappa, true), vec![objective]));
    }

    let mut a = mean_w / (nonzero.iter().sum::<f64>() / nonzero.len() as f64);
    let scaled = |a: f64| entries.iter().map(|c| a * c).collect::<Vec<_>>();
    let mut kappa = nearest_sorted(w, &scaled(a));
    let mut history = vec![scaled_objective(w, &entries, a, &kappa)];

    for _ in 0..max_iters {
        let (num, den) = w.iter().zip(&kappa).fold((0.0, 0.0), |(n, d), (&x, &k)| {
            let c = entries[k as usize];
            (n + x * c, d + c * c)
        });
        // everything sits on a zero entry: the scale is unidentified
        if den == 0.0 {
            break;
        }
        let next = num / den;
        if !(next.is_finite() && next > 0.0) {
            break;
        }
        a = next;
        let next_kappa = nearest_sorted(w, &scaled(a));
        history.push(scaled_objective(w, &entries, a, &next_kappa));
        let settled = next_kappa == kappa;
        kappa = next_kappa;
        if settled {
            break;
        }
    }

    let cb = Codebook::fixed_with_scale(entries, a)?;
    Ok((QuantParams::from_parts(cb, kappa, false), history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use crate::quantizers::{assign_fixed, decompress};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(w: &[f64], q: &QuantParams) -> f64 {
        q.distortion(w)
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(decompress(&binarize(&[0.3, -2.0, 0.0])), vec![1.0, -1.0, 1.0]);
        assert_eq!(decompress(&binarize(&[0.1, 5.0, 3.0])), vec![1.0; 3]);
    }

    #[test]
    fn binarize_is_nearest_neighbour() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let q = decompress(&binarize(&w));
        let nn = oracles::brute_nearest(&w, &[-1.0, 1.0], 1.0);
        for (i, &k) in nn.iter().enumerate() {
            assert_eq!(q[i], [-1.0, 1.0][k]);
        }
    }

    #[test]
    fn binarize_scale_example_matches_enumeration() {
        let w = [0.5, -1.5, 1.0];
        let q = binarize_scale(&w).unwrap();
        assert_eq!(q.codebook().scale(), Some(1.0));
        assert_eq!(decompress(&q), vec![1.0, -1.0, 1.0]);
        let brute = oracles::brute_binarize_scale(&w).unwrap();
        assert!((brute.objective - objective(&w, &q)).abs() < 1e-12);
        assert!((brute.scale.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binarize_scale_constant_vector_is_exact() {
        let w = [0.75; 6];
        let q = binarize_scale(&w).unwrap();
        assert!(q.codebook().scale() == Some(0.75));
        assert_eq!(objective(&w, &q), 0.0);
    }

    #[test]
    fn scaled_quantizers_degenerate_on_zero_input() {
        let q = binarize_scale(&[0.0, 0.0]).unwrap();
        assert!(q.is_degenerate());
        assert_eq!(q.codebook().scale(), Some(0.0));
        assert_eq!(decompress(&q), vec![0.0, 0.0]);
        assert_eq!(q.assignments().indices(), &[1, 1]);

        let q = ternarize_scale(&[0.0, 0.0, 0.0]).unwrap();
        assert!(q.is_degenerate());
        assert_eq!(q.assignments().indices(), &[1, 1, 1]);

        assert_eq!(binarize_scale(&[]), Err(QuantizeError::EmptyInput));
        assert_eq!(ternarize_scale(&[f64::NAN]), Err(QuantizeError::NonFinite));
    }

    #[test]
    fn ternarize_examples() {
        assert_eq!(decompress(&ternarize(&[0.4, 0.5, -0.6])), vec![0.0, 1.0, -1.0]);
        assert_eq!(decompress(&ternarize(&[0.0; 4])), vec![0.0; 4]);
    }

    #[test]
    fn ternarize_agrees_with_assign_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..2000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q = ternarize(&w);
        assert_eq!(q.assignments(), &assign_fixed(&w, &Codebook::ternary()));
    }

    #[test]
    fn ternarize_scale_example() {
        let w = [1.0, 0.9, 0.1];
        let q = ternarize_scale(&w).unwrap();
        assert!((q.codebook().scale().unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(q.assignments().indices(), &[2, 2, 1]);
        let brute = oracles::brute_ternarize_scale(&w).unwrap();
        assert!((brute.objective - objective(&w, &q)).abs() < 1e-12);

        let q = ternarize_scale(&[0.3, 0.3]).unwrap();
        assert!((q.codebook().scale().unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(q.assignments().indices(), &[2, 2]);
    }

    #[test]
    fn ternarize_scale_support_is_consistent() {
        // |w_(j*)| > a/2 > |w_(j*+1)| on generic inputs
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let p = rng.random_range(2..40);
            let w: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = ternarize_scale(&w).unwrap();
            let a = q.codebook().scale().unwrap();
            let mut mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
            mags.sort_by(|x, y| y.total_cmp(x));
            let j = q.assignments().indices().iter().filter(|&&k| k != 1).count();
            assert!(j >= 1);
            assert!(mags[j - 1] > a / 2.0);
            if j < p {
                assert!(mags[j] < a / 2.0);
            }
            let mean: f64 = mags[..j].iter().sum::<f64>() / j as f64;
            assert!((mean - a).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn pow2_examples() {
        let q = pow2_quantize(&[0.3, 5.0, 0.0, -0.3], 2);
        assert_eq!(decompress(&q), vec![0.25, 1.0, 0.0, -0.25]);
        // nearest over {0, +-1, +-1/2, +-1/4}
        let c = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
        let nn = oracles::brute_nearest(&[0.3], &c, 1.0);
        assert_eq!(c[nn[0]], 0.25);
        assert_eq!(pow2_codebook(2).entries(), &c);
    }

    #[test]
    fn pow2_boundaries() {
        // f in (C, C+1] maps to 2^-C, f > C+1 maps to 0
        assert_eq!(pow2_value(0.2, 2), 0.25);
        assert_eq!(pow2_value(0.125, 2), 0.25);
        assert_eq!(pow2_value(0.12, 2), 0.0);
        assert_eq!(pow2_value(-1.0, 0), -1.0);
        assert_eq!(pow2_value(0.4, 0), 0.0);
        assert_eq!(pow2_value(0.6, 0), 1.0);
    }

    #[test]
    fn fixed_scale_alternate_binary_equals_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let w: Vec<f64> = (0..37).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (alt, hist) = fixed_scale_alternate(&w, &Codebook::binary(), 50).unwrap();
            let exact = binarize_scale(&w).unwrap();
            assert_eq!(alt.codebook().scale(), exact.codebook().scale());
            assert_eq!(alt.assignments(), exact.assignments());
            assert!(hist.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn fixed_scale_alternate_ternary_bounded_by_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let w: Vec<f64> = (0..25).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (alt, hist) = fixed_scale_alternate(&w, &Codebook::ternary(), 100).unwrap();
            let exact = ternarize_scale(&w).unwrap();
            assert!(objective(&w, &alt) >= objective(&w, &exact) * (1.0 - 1e-12));
            assert!(hist.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn fixed_scale_alternate_single_weight() {
        let cb = Codebook::fixed(vec![1.0]).unwrap();
        let (q, _) = fixed_scale_alternate(&[2.0], &cb, 10).unwrap();
        assert_eq!(q.codebook().scale(), Some(2.0));
        assert_eq!(objective(&[2.0], &q), 0.0);
    }

    #[test]
    fn fixed_scale_alternate_all_on_zero_entry() {
        let cb = Codebook::fixed(vec![0.0]).unwrap();
        let (q, _) = fixed_scale_alternate(&[1.0, -2.0], &cb, 10).unwrap();
        assert!(q.is_degenerate());
        assert_eq!(decompress(&q), vec![0.0, 0.0]);
    }

    fn nearest_value(t: f64, values: &[f64]) -> f64 {
        values.iter().copied().fold(f64::NAN, |best, v| {
            if best.is_nan() || (t - v).abs() < (t - best).abs() {
                v
            } else {
                best
            }
        })
    }

    proptest! {
        #[test]
        fn outputs_are_nearest_in_scaled_codebook(w in proptest::collection::vec(-3.0f64..3.0, 1..40), c_exp in 0u32..6) {
            let quantized = [
                binarize(&w),
                ternarize(&w),
                pow2_quantize(&w, c_exp),
                binarize_scale(&w).unwrap(),
                ternarize_scale(&w).unwrap(),
            ];
            for q in &quantized {
                let values = q.codebook().values();
                for (&t, &d) in w.iter().zip(&decompress(q)) {
                    let best = nearest_value(t, &values);
                    prop_assert!((t - d).abs() <= (t - best).abs() + 1e-12);
                }
            }
        }

        #[test]
        fn fixed_operators_are_idempotent(w in proptest::collection::vec(-3.0f64..3.0, 1..40), c_exp in 0u32..6) {
            let b = decompress(&binarize(&w));
            prop_assert_eq!(decompress(&binarize(&b)), b);
            let t = decompress(&ternarize(&w));
            prop_assert_eq!(decompress(&ternarize(&t)), t);
            let p = decompress(&pow2_quantize(&w, c_exp));
            prop_assert_eq!(decompress(&pow2_quantize(&p, c_exp)), p);
            // rescaled outputs reproduce up to rounding of the mean magnitude
            for quantize in [binarize_scale, ternarize_scale] {
                let once = decompress(&quantize(&w).unwrap());
                let twice = decompress(&quantize(&once).unwrap());
                for (x, y) in once.iter().zip(&twice) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }

        #[test]
        fn binarization_is_scale_invariant(w in proptest::collection::vec(-3.0f64..3.0, 1..40), c in 0.01f64..100.0) {
            let cw: Vec<f64> = w.iter().map(|x| c * x).collect();
            let (bw, bcw) = (binarize(&w), binarize(&cw));
            prop_assert_eq!(bcw.assignments(), bw.assignments());
            let a = binarize_scale(&w).unwrap();
            let ca = binarize_scale(&cw).unwrap();
            prop_assert_eq!(a.assignments(), ca.assignments());
            let (sa, sca) = (a.codebook().scale().unwrap(), ca.codebook().scale().unwrap());
            prop_assert!((sca - c * sa).abs() <= 1e-12 * sca.max(1e-300));
        }
    }
}
