//! Small statistics helpers for Monte Carlo checks: sample quantiles,
//! Kolmogorov-Smirnov distance, and exact binomial confidence intervals.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linearly interpolated quantile of an ascending-sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// `sup_x |F_n(x) − F(x)|` of a sample against a model CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic p-value of a KS distance `d` on `n` samples (Kolmogorov
/// series with Stephens' small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn solve_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion
/// `k / n` at confidence `level`.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "invalid binomial counts");
    let a = 0.5 * (1.0 - level);
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        solve_increasing(|x| beta_reg(kf, nf - kf + 1.0, x), a)
    };
    let hi = if k == n {
        1.0
    } else {
        solve_increasing(|x| beta_reg(kf + 1.0, nf - kf, x), 1.0 - a)
    };
    (lo, hi)
}

/// Exact binomial acceptance region for `p0`: the smallest `[k_lo, k_hi]`
/// holding central probability at least `level` under Binomial(n, p0).
pub fn binomial_acceptance(n: u64, p0: f64, level: f64) -> (u64, u64) {
    let a = 0.5 * (1.0 - level);
    // P(K ≤ k) = I_{1−p}(n − k, k + 1).
    let cdf = |k: u64| {
        if k >= n {
            1.0
        } else {
            beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p0)
        }
    };
    let mut lo = 0;
    while lo < n && cdf(lo) < a {
        lo += 1;
    }
    let mut hi = lo;
    while hi < n && cdf(hi) < 1.0 - a {
        hi += 1;
    }
    (lo, hi)
}
