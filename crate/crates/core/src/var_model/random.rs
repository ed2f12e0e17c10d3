//! Random correlation matrices and random VAR models.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Partition, VarParams};
use crate::error::{Error, Result};
use crate::gc;
use crate::linalg::{self, Mat};

/// Tolerance for every binary chop (radius, γ, GC target): `√ε`.
pub const CHOP_TOL: f64 = 1.490_116_119_384_765_6e-8;
/// Restarts allowed when a random draw cannot reach the γ target.
pub const MAX_RETRIES: usize = 100;
/// Coefficient decay constant: lag blocks are scaled by `exp(−√p · w)`.
pub const COEF_DECAY_W: f64 = 1.0;
const MAX_BRACKET: f64 = 1.152_921_504_606_847e18; // 2^60
const MAX_BISECTIONS: usize = 200;

/// What the generated model's causal block should look like.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenMode {
    /// `A_k[x, y] = 0` for all lags.
    Null,
    /// Population single-regression GC equal to the given value.
    TargetGc(f64),
}

/// `γ = −log|Σ| + Σ_i log Σ_ii`; zero iff `Σ` is diagonal.
pub fn log_generalised_correlation(sigma: &Mat) -> Result<f64> {
    let ld = linalg::log_det_pd(sigma)?;
    Ok(sigma.diagonal().iter().map(|v| v.ln()).sum::<f64>() - ld)
}

/// Random correlation matrix with log-generalised correlation `gamma`.
///
/// Draws a Haar-orthogonal `M` and a χ²(1) spectrum `v`, then shifts the
/// spectrum by `c ≥ 0` (which lowers γ monotonically) until the target is
/// hit; a draw whose unshifted γ is already below target is discarded.
pub fn random_correlation<R: Rng + ?Sized>(n: usize, gamma: f64, rng: &mut R) -> Result<Mat> {
    if n == 0 {
        return Err(Error::DimensionMismatch("correlation matrix of size 0".into()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if n == 1 {
        if gamma > CHOP_TOL {
            return Err(Error::Unachievable(format!(
                "a 1x1 correlation matrix has gamma = 0, target {gamma}"
            )));
        }
        return Ok(Mat::identity(1, 1));
    }

    for _ in 0..MAX_RETRIES {
        let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let (q, r) = (qr.q(), qr.r());
        let mut m = q;
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                m.column_mut(j).neg_mut();
            }
        }
        let v = DVector::from_fn(n, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            z * z
        });

        // Rows of M have unit norm, so diag(M diag(v + c) Mᵀ) = diag(M diag(v) Mᵀ) + c.
        let m2 = m.map(|x| x * x);
        let d0 = &m2 * &v;
        let gstar = |c: f64| -> f64 {
            d0.iter().map(|d| (d + c).ln()).sum::<f64>() - v.iter().map(|x| (x + c).ln()).sum::<f64>()
        };

        let g0 = gstar(0.0);
        if !g0.is_finite() || g0 < gamma {
            continue;
        }
        let c = if (g0 - gamma).abs() <= CHOP_TOL {
            0.0
        } else {
            let mut hi = 1.0;
            while gstar(hi) > gamma + CHOP_TOL {
                hi *= 2.0;
                if hi > MAX_BRACKET {
                    return Err(Error::Unachievable("gamma chop failed to bracket".into()));
                }
            }
            let mut lo = 0.0;
            let mut c = hi;
            for _ in 0..MAX_BISECTIONS {
                let gh = gstar(c);
                if (gh - gamma).abs() <= CHOP_TOL {
                    break;
                }
                if gh > gamma {
                    lo = c;
                } else {
                    hi = c;
                }
                c = 0.5 * (lo + hi);
            }
            c
        };

        let shifted = v.add_scalar(c);
        let cov = &m * Mat::from_diagonal(&shifted) * m.transpose();
        let s = DVector::from_fn(n, |i, _| cov[(i, i)].sqrt());
        let mut corr = Mat::from_fn(n, n, |i, j| cov[(i, j)] / (s[i] * s[j]));
        corr = linalg::symmetrize(&corr);
        corr.fill_diagonal(1.0);
        return Ok(corr);
    }
    Err(Error::Unachievable(format!(
        "gamma = {gamma} not reached after {MAX_RETRIES} restarts"
    )))
}

/// Exponentially reweights the lag blocks, `A_k ← λ^k A_k`, so the companion
/// spectral radius equals `rho`.
fn reweight_to_radius(a: &Mat, n: usize, rho: f64) -> Result<Mat> {
    let p = a.ncols() / n;
    let mut out = a.clone();
    // Radius scales exactly linearly in λ; repeat once or twice to mop up
    // eigen-solver rounding.
    for _ in 0..5 {
        let r = linalg::spectral_radius_companion(&out);
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Unachievable(format!("cannot reweight a model with radius {r}")));
        }
        if (r - rho).abs() <= CHOP_TOL * rho {
            return Ok(out);
        }
        let lam = rho / r;
        for k in 1..=p {
            let mut blk = out.view_mut((0, (k - 1) * n), (n, n));
            blk *= lam.powi(k as i32);
        }
    }
    let r = linalg::spectral_radius_companion(&out);
    if (r - rho).abs() <= CHOP_TOL {
        Ok(out)
    } else {
        Err(Error::Unachievable(format!("radius {r} did not settle at {rho}")))
    }
}

fn scale_xy(a: &Mat, part: &Partition, p: usize, c: f64) -> Mat {
    let n = part.n();
    let mut out = a.clone();
    for k in 0..p {
        for i in part.x() {
            for j in part.y() {
                out[(i, k * n + j)] = if c == 0.0 { 0.0 } else { c * a[(i, k * n + j)] };
            }
        }
    }
    out
}

/// Random VAR(p) with spectral radius `rho`, correlation-matrix residuals of
/// log-generalised correlation `gamma`, and either no `y → x` causality or
/// a prescribed population GC.
pub fn random_var<R: Rng + ?Sized>(
    p: usize,
    part: &Partition,
    rho: f64,
    gamma: f64,
    mode: GenMode,
    rng: &mut R,
) -> Result<VarParams> {
    let n = part.n();
    if p == 0 {
        return Err(Error::DimensionMismatch("model order p must be >= 1".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
    }
    if let GenMode::TargetGc(f) = mode {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidArgument(format!("target GC must be > 0, got {f}")));
        }
    }

    let sigma = random_correlation(n, gamma, rng)?;
    let decay = (-(p as f64).sqrt() * COEF_DECAY_W).exp();
    let raw = Mat::from_fn(n, n * p, |_, _| decay * rng.sample::<f64, _>(StandardNormal));

    let a = match mode {
        GenMode::Null => reweight_to_radius(&scale_xy(&raw, part, p, 0.0), n, rho)?,
        GenMode::TargetGc(target) => {
            let eval = |c: f64| -> Result<(Mat, f64)> {
                let a = reweight_to_radius(&scale_xy(&raw, part, p, c), n, rho)?;
                let m = VarParams::from_parts(a.clone(), sigma.clone())?;
                Ok((a, gc::gc_time_sr(&m, part)?.value))
            };
            chop_gc(eval, target)?
        }
    };
    let model = VarParams::new(a, sigma)?;
    Ok(model)
}

fn chop_gc(eval: impl Fn(f64) -> Result<(Mat, f64)>, target: f64) -> Result<Mat> {
    let (mut lo, mut f_lo) = (0.0, 0.0);
    let mut hi = 1.0;
    let (mut a_hi, mut f_hi) = eval(hi)?;
    while f_hi < target {
        if f_hi < f_lo - CHOP_TOL {
            return Err(Error::Unachievable("GC is not monotone in the causal scale".into()));
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(Error::Unachievable(format!("GC target {target} could not be bracketed")));
        }
        (a_hi, f_hi) = eval(hi)?;
    }
    if (f_hi - target).abs() <= CHOP_TOL {
        return Ok(a_hi);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (a_mid, f_mid) = eval(mid)?;
        if (f_mid - target).abs() <= CHOP_TOL {
            return Ok(a_mid);
        }
        if f_mid < f_lo - CHOP_TOL || f_mid > f_hi + CHOP_TOL {
            return Err(Error::Unachievable("GC is not monotone in the causal scale".into()));
        }
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Err(Error::Unachievable(format!("GC chop did not converge to {target}")))
}
