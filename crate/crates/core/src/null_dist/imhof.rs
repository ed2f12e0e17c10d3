//! CDF of `Q = Σ_i λ_i W_i`, `W_i` iid χ²(h), by Imhof's inversion
//!
//! ```text
//! P(Q ≤ x) = 1/2 − (1/π) ∫_0^∞ sin θ(u) / (u ρ(u)) du
//! θ(u) = ½ Σ h·atan(λ_i u) − ½ x u,   ρ(u) = Π (1 + λ_i² u²)^{h/4}
//! ```
//!
//! `θ` is concave, so past its maximum it crosses each level `mπ` exactly
//! once. The integral up to the first such crossing is done adaptively;
//! beyond it the integrand alternates in sign between crossings and the
//! partial sums are accelerated with Wynn's ε algorithm. The tail beyond
//! `U` is bounded by `1 / (π k U^k Π λ_i^{h/2})` with `k = ½ Σ h`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;

/// Target absolute accuracy of the CDF.
pub const CDF_TOL: f64 = 1e-8;
/// Absolute tolerance on the oscillatory integral (the CDF error is this
/// divided by π).
const INT_TOL: f64 = 1e-9;
const MAX_TAIL_TERMS: usize = 20_000;
const WYNN_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImhofResult {
    pub value: f64,
    /// Certified bound on `|value − CDF(x)|`.
    pub error_bound: f64,
}

struct Integrand<'a> {
    lam: &'a [f64],
    h: f64,
    x: f64,
}

impl Integrand<'_> {
    fn theta(&self, u: f64) -> f64 {
        0.5 * self.h * self.lam.iter().map(|l| (l * u).atan()).sum::<f64>() - 0.5 * self.x * u
    }

    fn dtheta(&self, u: f64) -> f64 {
        0.5 * self.h * self.lam.iter().map(|l| l / (1.0 + l * l * u * u)).sum::<f64>() - 0.5 * self.x
    }

    fn log_rho(&self, u: f64) -> f64 {
        0.25 * self.h * self.lam.iter().map(|l| (l * l * u * u).ln_1p()).sum::<f64>()
    }

    fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.dtheta(0.0);
        }
        self.theta(u).sin() * (-self.log_rho(u)).exp() / u
    }

    /// Smallest `u > from` with `θ(u) = level`, given `θ(from) > level` and
    /// `θ` decreasing from `from` on.
    fn crossing(&self, from: f64, level: f64) -> Result<f64> {
        // By concavity the tangent at `from` reaches `level` no later than θ.
        let base = 2.0 * PI / self.x;
        let d = self.dtheta(from);
        let mut step = if d < 0.0 {
            ((self.theta(from) - level) / -d).min(1e3 * base)
        } else {
            base
        };
        let mut hi = from + step;
        while self.theta(hi) > level {
            step *= 2.0;
            hi = from + step;
            if !hi.is_finite() {
                return Err(Error::Internal("Imhof phase crossing not bracketed".into()));
            }
        }
        // Newton from the right converges monotonically on a concave,
        // decreasing function.
        let mut lo = from;
        let mut u = hi;
        for _ in 0..100 {
            let f = self.theta(u) - level;
            let d = self.dtheta(u);
            let mut next = u - f / d;
            if !(next > lo && next <= u) || !next.is_finite() {
                next = 0.5 * (lo + u);
            }
            if f > 0.0 {
                lo = u;
            }
            if (next - u).abs() <= 1e-15 * u.abs() {
                return Ok(next);
            }
            u = next;
        }
        Ok(u)
    }
}

fn wynn_epsilon(s: &[f64]) -> f64 {
    let mut prev = vec![0.0; s.len() + 1];
    let mut cur = s.to_vec();
    let mut best = *s.last().expect("non-empty sequence");
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == 0.0 || !d.is_finite() {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            let v = *cur.last().expect("non-empty column");
            if !v.is_finite() {
                return best;
            }
            best = v;
        }
    }
    best
}

/// `P(Σ λ_i W_i ≤ x)` for positive weights `λ_i` and `W_i` iid χ²(h).
pub fn imhof_cdf(weights: &[f64], h: f64, x: f64) -> Result<ImhofResult> {
    if weights.is_empty() || weights.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("Imhof weights must be positive and finite".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
    }
    if x.is_nan() {
        return Err(Error::InvalidArgument("CDF argument is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(ImhofResult { value: 0.0, error_bound: 0.0 });
    }
    let lmax = weights.iter().copied().fold(0.0, f64::max);
    let lam: Vec<f64> = weights.iter().map(|l| l / lmax).collect();
    let f = Integrand { lam: &lam, h, x: x / lmax };

    let k = 0.5 * h * lam.len() as f64;
    let log_prod = 0.5 * h * lam.iter().map(|l| l.ln()).sum::<f64>();
    let trunc = |u: f64| (-(PI * k).ln() - k * u.ln() - log_prod).exp();

    // Peak of θ.
    let u_peak = if f.dtheta(0.0) > 0.0 {
        let mut hi = 1.0;
        while f.dtheta(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f.dtheta(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    } else {
        0.0
    };
    let theta_peak = f.theta(u_peak);
    let mut level = (theta_peak / PI).ceil() - 1.0;
    if level * PI >= theta_peak {
        level -= 1.0;
    }
    let u0 = f.crossing(u_peak, level * PI)?;

    // Head: [0, u0] holds every oscillation up to the first crossing.
    let swings = ((2.0 * theta_peak - level * PI) / PI).abs().ceil() as usize + 1;
    let pieces = (4 * swings).clamp(8, 4000);
    let head = adaptive_gk(|u| f.eval(u), 0.0, u0, pieces, 0.25 * INT_TOL, 200_000);
    if !head.converged {
        return Err(Error::AccuracyNotMet { bound: head.error / PI });
    }

    let finish = |integral: f64, bound: f64| -> Result<ImhofResult> {
        let bound = bound / PI;
        if bound > CDF_TOL {
            return Err(Error::AccuracyNotMet { bound });
        }
        let value = (0.5 - integral / PI).clamp(0.0, 1.0);
        Ok(ImhofResult { value, error_bound: bound })
    };

    let mut quad_err = head.error;
    let mut partial = head.value;
    let mut sums = vec![partial];
    let mut u_lo = u0;
    let mut last_acc = f64::NAN;
    let mut stable = 0;
    for _ in 0..MAX_TAIL_TERMS {
        let t = trunc(u_lo);
        if t <= 0.25 * INT_TOL {
            return finish(partial, quad_err + t);
        }
        level -= 1.0;
        let u_hi = f.crossing(u_lo, level * PI)?;
        let seg = adaptive_gk(|u| f.eval(u), u_lo, u_hi, 1, 1e-3 * INT_TOL, 2_000);
        quad_err += seg.error;
        partial += seg.value;
        sums.push(partial);
        u_lo = u_hi;

        // Alternating, decreasing terms: the next one bounds the error.
        if seg.value.abs() <= 0.1 * INT_TOL {
            return finish(partial, quad_err + seg.value.abs());
        }
        if sums.len() >= 5 {
            let start = sums.len().saturating_sub(WYNN_WINDOW);
            let acc = wynn_epsilon(&sums[start..]);
            let delta = (acc - last_acc).abs();
            if delta <= 0.1 * INT_TOL {
                stable += 1;
                if stable >= 2 {
                    return finish(acc, quad_err + 10.0 * delta.max(1e-3 * INT_TOL));
                }
            } else {
                stable = 0;
            }
            last_acc = acc;
        }
    }
    Err(Error::AccuracyNotMet { bound: trunc(u_lo) / PI })
}
