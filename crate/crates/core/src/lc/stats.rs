use serde::{Deserialize, Serialize};

use crate::models::LrSchedule;
use crate::quantizers::index_bits;

pub const DEFAULT_FLOAT_BITS: u32 = 32;

/// Storage of the reference and the quantized net, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub p1: u64,
    pub p0: u64,
    /// Largest codebook size.
    pub k: usize,
    pub n_codebooks: usize,
    pub float_bits: u32,
    pub bits_reference: u64,
    pub bits_quantized: u64,
    pub rho: f64,
}

/// One shared codebook of size `k` for all `p1` quantized weights, `p0`
/// floats kept as is, `b` bits per float.
pub fn compression_stats(p1: u64, p0: u64, k: usize, b: u32) -> CompressionStats {
    compression_stats_groups(&[(p1, k)], p0, b)
}

/// Several codebooks, each with `(weights, K)`.
pub fn compression_stats_groups(groups: &[(u64, usize)], p0: u64, b: u32) -> CompressionStats {
    assert!(b > 0, "bits per float must be positive");
    let p1: u64 = groups.iter().map(|g| g.0).sum();
    let index: u64 = groups.iter().map(|&(n, k)| n * u64::from(index_bits(k))).sum();
    let entries: u64 = groups.iter().map(|g| g.1 as u64).sum();
    let bits_reference = (p1 + p0) * u64::from(b);
    let bits_quantized = index + (p0 + entries) * u64::from(b);
    CompressionStats {
        p1,
        p0,
        k: groups.iter().map(|g| g.1).max().unwrap_or(0),
        n_codebooks: groups.len(),
        float_bits: b,
        bits_reference,
        bits_quantized,
        rho: bits_reference as f64 / bits_quantized as f64,
    }
}

/// Learning rate for an L step at penalty `mu`: `min(eta_t, 1/mu)`.
pub fn clipped_lr(t: usize, schedule: &LrSchedule, mu: f64) -> f64 {
    schedule.rate(t).min(1.0 / mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenet300_ratios() {
        let expect = [(2, 30.5), (4, 15.6), (8, 10.5), (16, 7.9), (32, 6.3), (64, 5.3)];
        for (k, rho) in expect {
            let s = compression_stats(266_200, 410, k, 32);
            assert_eq!(s.bits_reference, 266_610 * 32);
            assert_eq!((s.rho * 10.0).round() / 10.0, rho, "K = {k}");
        }
    }

    #[test]
    fn exact_bit_counts() {
        let s = compression_stats(10, 3, 5, 32);
        assert_eq!(s.bits_reference, 13 * 32);
        assert_eq!(s.bits_quantized, 10 * 3 + (3 + 5) * 32);
        // one codebook entry, zero index bits
        let s = compression_stats(100, 0, 1, 32);
        assert_eq!(s.bits_quantized, 32);
    }

    #[test]
    fn ratio_tends_to_b_over_log2k() {
        for m in 1..=8u32 {
            let s = compression_stats(1 << 40, 0, 1 << m, 32);
            assert!((s.rho - 32.0 / f64::from(m)).abs() < 1e-6);
        }
    }

    #[test]
    fn grouped_matches_single_when_one_group() {
        assert_eq!(compression_stats_groups(&[(500, 4)], 7, 16), compression_stats(500, 7, 4, 16));
        let s = compression_stats_groups(&[(500, 4), (20, 2)], 7, 32);
        assert_eq!(s.bits_quantized, 500 * 2 + 20 + (7 + 6) * 32);
        assert_eq!(s.k, 4);
    }

    #[test]
    fn clipped_lr_examples() {
        let s = LrSchedule { initial: 0.1, decay: 1.0 };
        assert_eq!(clipped_lr(0, &s, 5.0), 0.1);
        assert_eq!(clipped_lr(0, &s, 100.0), 0.01);
        assert!(clipped_lr(0, &s, 1e300) < 1e-299);
        let s = LrSchedule { initial: 0.02, decay: 0.99 };
        assert_eq!(clipped_lr(3, &s, 1e-4), 0.02 * 0.99f64.powi(3));
    }
}
