//! Order-stable reductions and small estimation helpers.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

const PAIRWISE_LEAF: usize = 8;

/// Pairwise (tree) summation in a fixed split order.
///
/// The tree shape depends only on the slice length, so the result is
/// reproducible no matter how the summands were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += *v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values and exactly
/// zero for constant values (deviations are taken from the first value).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let shift = values[0];
    let m = pairwise_sum_by(n, &|i| values[i] - shift) / n as f64;
    pairwise_sum_by(n, &|i| {
        let d = values[i] - shift - m;
        d * d
    }) / (n - 1) as f64
}

/// Standard error of the mean of `values`.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    math::sqrt(sample_variance(values) / n as f64)
}

/// Quadrature weights on a uniform grid over `[a, b]`: composite Simpson
/// for odd point counts, trapezoid for even ones.
pub fn uniform_rule_weights(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => {
            let h = (b - a) / (points - 1) as f64;
            let mut w = alloc::vec![0.0; points];
            if points % 2 == 1 {
                for (i, wi) in w.iter_mut().enumerate() {
                    let c = if i == 0 || i == points - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    *wi = c * h / 3.0;
                }
            } else {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi = if i == 0 || i == points - 1 { 0.5 * h } else { h };
                }
            }
            w
        }
    }
}

/// Percentile of an already sorted sample, linear interpolation between ranks.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Summary of a nonparametric bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentile bootstrap of a statistic over `n` exchangeable rows.
///
/// `statistic` receives the resampled row indices. The interval is the
/// central `level` percentile range (e.g. 0.95).
pub fn bootstrap(
    n: usize,
    resamples: usize,
    seed: u64,
    level: f64,
    statistic: impl Fn(&[usize]) -> f64,
) -> BootstrapSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xb007);
    let mut idx = alloc::vec![0usize; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = (rng.next_u64() % n as u64) as usize;
        }
        stats.push(statistic(&idx));
    }
    let stderr = math::sqrt(sample_variance(&stats));
    stats.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    BootstrapSummary {
        stderr,
        lower: percentile_sorted(&stats, tail),
        upper: percentile_sorted(&stats, 1.0 - tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum_by(1000, &|i| (i + 1) as f64), 500_500.0);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let w = uniform_rule_weights(0.0, 2.0, 7);
        let xs: Vec<f64> = (0..7).map(|i| i as f64 / 3.0).collect();
        let got: f64 = w.iter().zip(&xs).map(|(w, x)| w * x * x * x).sum();
        assert!((got - 4.0).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_for_even_grids() {
        let w = uniform_rule_weights(0.0, 1.0, 4);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_interval_has_zero_weights() {
        let w = uniform_rule_weights(0.7, 0.7, 5);
        assert!(w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bootstrap_of_constant_is_degenerate() {
        let s = bootstrap(50, 100, 1, 0.95, |_| 3.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(s.lower, 3.0);
        assert_eq!(s.upper, 3.0);
    }

    #[test]
    fn variance_of_constant_is_exactly_zero() {
        let v = vec![4.0 * core::f64::consts::LN_2; 100];
        assert_eq!(sample_variance(&v), 0.0);
        let w = [1.0, 2.0, 3.0, 4.0];
        assert!((sample_variance(&w) - 5.0 / 3.0).abs() < 1e-15);
    }
}
