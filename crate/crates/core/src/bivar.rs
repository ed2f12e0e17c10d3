//! Closed forms for the bivariate VAR(1)
//!
//! ```text
//! x_t = a_xx x_{t−1} + a_xy y_{t−1} + ε_x
//! y_t = a_yx x_{t−1} + a_yy y_{t−1} + ε_y,   cov(ε) = [[σ_xx, σ_xy], [σ_xy, σ_yy]]
//! ```
//!
//! These are written out independently of the general pipeline and serve
//! as its reference.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gc::FrequencyBand;
use crate::linalg::Mat;
use crate::var_model::{Partition, VarParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bivar1Params {
    pub a_xx: f64,
    pub a_xy: f64,
    pub a_yx: f64,
    pub a_yy: f64,
    pub sigma_xx: f64,
    pub sigma_xy: f64,
    pub sigma_yy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BivarDerived {
    pub p: f64,
    pub q: f64,
    /// Reduced (x-only) innovations variance.
    pub v: f64,
    pub kappa: f64,
    /// `[Γ_0⁻¹]_yy`, defined on the null (`a_xy = 0`).
    pub omega_yy: Option<f64>,
}

impl Bivar1Params {
    pub fn validate(&self) -> Result<()> {
        // Eigenvalues of a real 2x2 lie inside the unit disc iff
        // |det| < 1 and |tr| < 1 + det.
        let tr = self.a_xx + self.a_yy;
        let det = self.a_xx * self.a_yy - self.a_xy * self.a_yx;
        if !(det.abs() < 1.0 && tr.abs() < 1.0 + det) {
            return Err(Error::InvalidModel("coefficient matrix is not stable".into()));
        }
        if !(self.sigma_xx > 0.0
            && self.sigma_yy > 0.0
            && self.sigma_xy * self.sigma_xy < self.sigma_xx * self.sigma_yy)
        {
            return Err(Error::InvalidModel("residual covariance is not positive-definite".into()));
        }
        Ok(())
    }

    pub fn to_model(&self) -> Result<(VarParams, Partition)> {
        self.validate()?;
        let a = Mat::from_row_slice(2, 2, &[self.a_xx, self.a_xy, self.a_yx, self.a_yy]);
        let s = Mat::from_row_slice(2, 2, &[self.sigma_xx, self.sigma_xy, self.sigma_xy, self.sigma_yy]);
        Ok((VarParams::new(a, s)?, Partition { nx: 1, ny: 1 }))
    }

    pub fn is_null(&self) -> bool {
        self.a_xy == 0.0
    }

    fn check_null(&self) -> Result<()> {
        if self.is_null() {
            Ok(())
        } else {
            Err(Error::NotNull { lag: 1, row: 0, col: 1, value: self.a_xy })
        }
    }

    /// `σ_{yy|x} = σ_yy − σ_xy² / σ_xx`.
    pub fn sigma_yy_x(&self) -> f64 {
        self.sigma_yy - self.sigma_xy * self.sigma_xy / self.sigma_xx
    }

    fn pq(&self) -> (f64, f64) {
        let (s_xx, s_xy, s_yy) = (self.sigma_xx, self.sigma_xy, self.sigma_yy);
        let p = s_xx * (1.0 + self.a_yy * self.a_yy) - 2.0 * s_xy * self.a_xy * self.a_yy
            + s_yy * self.a_xy * self.a_xy;
        let q = 2.0 * (s_xx * self.a_yy - s_xy * self.a_xy);
        (p, q)
    }

    /// Lag-zero autocovariance entries `(var x, cov(x, y), var y)` on the null.
    fn gamma0_null(&self) -> (f64, f64, f64) {
        let (a, c, b) = (self.a_xx, self.a_yx, self.a_yy);
        let p = self.sigma_xx / (1.0 - a * a);
        let r = (a * c * p + self.sigma_xy) / (1.0 - a * b);
        let q = (c * c * p + 2.0 * b * c * r + self.sigma_yy) / (1.0 - b * b);
        (p, r, q)
    }

    pub fn derived(&self) -> BivarDerived {
        let (p, q) = self.pq();
        let mut disc = p * p - q * q;
        if disc < 0.0 && disc > -1e-14 * p * p {
            disc = 0.0;
        }
        let v = 0.5 * (p + disc.sqrt());
        let kappa = self.sigma_xy / (self.sigma_xx * self.sigma_yy).sqrt();
        let omega_yy = self.is_null().then(|| {
            let (g_p, g_r, g_q) = self.gamma0_null();
            g_p / (g_p * g_q - g_r * g_r)
        });
        BivarDerived { p, q, v, kappa, omega_yy }
    }
}

/// `F = log(v / σ_xx)`.
pub fn bivar_gc_time(b: &Bivar1Params) -> f64 {
    (b.derived().v / b.sigma_xx).ln().max(0.0)
}

/// `f(ω) = log[(P − Q cos ω) / (P − Q cos ω − a_xy² σ_{yy|x})]`.
pub fn bivar_gc_spectral(b: &Bivar1Params, omega: f64) -> f64 {
    let (p, q) = b.pq();
    let num = p - q * omega.cos();
    (num / (num - b.a_xy * b.a_xy * b.sigma_yy_x())).ln()
}

/// Band average of [`bivar_gc_spectral`] by adaptive Gauss-Kronrod.
pub fn bivar_gc_band(b: &Bivar1Params, band: &FrequencyBand) -> f64 {
    let r = crate::quadrature::adaptive_gk(|w| bivar_gc_spectral(b, w), band.lo, band.hi, 4, 1e-13, 10_000);
    r.value / band.measure()
}

/// The single null weight `λ = (1 − κ²) σ_yy ω_yy / (1 − a_yy²)`.
pub fn bivar_null_lambda(b: &Bivar1Params) -> Result<f64> {
    b.check_null()?;
    let d = b.derived();
    let omega_yy = d.omega_yy.expect("null parameters");
    Ok((1.0 - d.kappa * d.kappa) * b.sigma_yy * omega_yy / (1.0 - b.a_yy * b.a_yy))
}

/// Point-frequency null weight `λ(ω) = (1 − κ²) σ_yy ω_yy / (1 − 2a cos ω + a²)`.
pub fn bivar_null_lambda_spectral(b: &Bivar1Params, omega: f64) -> Result<f64> {
    b.check_null()?;
    let d = b.derived();
    let a = b.a_yy;
    Ok((1.0 - d.kappa * d.kappa) * b.sigma_yy * d.omega_yy.expect("null parameters")
        / (1.0 - 2.0 * a * omega.cos() + a * a))
}

/// Antiderivative of `1 / (1 − 2a cos ω + a²)` on `[0, 2π]`, continued
/// across the `tan(ω/2)` branch point at `ω = π`.
pub fn arctan_antiderivative(a: f64, omega: f64) -> f64 {
    let c = 2.0 / (1.0 - a * a);
    if omega == PI {
        return c * PI / 2.0;
    }
    let g = c * (((1.0 + a) / (1.0 - a)) * (omega / 2.0).tan()).atan();
    if omega > PI {
        g + c * PI
    } else {
        g
    }
}

/// Band average of `λ(ω)` from the closed antiderivative.
pub fn bivar_null_lambda_band(b: &Bivar1Params, band: &FrequencyBand) -> Result<f64> {
    b.check_null()?;
    let d = b.derived();
    let a = b.a_yy;
    let integral = arctan_antiderivative(a, band.hi) - arctan_antiderivative(a, band.lo);
    Ok((1.0 - d.kappa * d.kappa) * b.sigma_yy * d.omega_yy.expect("null parameters") * integral
        / band.measure())
}

/// A grid model with `Σ = [[1, κ], [κ, 1]]`, `a_yx = 0` and `a_xy ≥ 0`
/// chosen so that the population GC equals `target`.
pub fn grid_model(a_xx: f64, a_yy: f64, kappa: f64, target: f64) -> Result<Bivar1Params> {
    let mut b = Bivar1Params {
        a_xx,
        a_xy: 0.0,
        a_yx: 0.0,
        a_yy,
        sigma_xx: 1.0,
        sigma_xy: kappa,
        sigma_yy: 1.0,
    };
    b.validate()?;
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target GC must be > 0, got {target}")));
    }
    let gc_at = |c: f64| {
        let mut t = b;
        t.a_xy = c;
        bivar_gc_time(&t)
    };
    let mut hi = 1e-3;
    while gc_at(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Unachievable(format!("GC {target} not reachable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gc_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    b.a_xy = 0.5 * (lo + hi);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white() -> Bivar1Params {
        Bivar1Params { a_xx: 0.0, a_xy: 0.0, a_yx: 0.0, a_yy: 0.0, sigma_xx: 1.0, sigma_xy: 0.0, sigma_yy: 1.0 }
    }

    #[test]
    fn white_noise_values() {
        let b = white();
        let d = b.derived();
        assert_eq!(d.omega_yy, Some(1.0));
        assert_eq!(bivar_null_lambda(&b).unwrap(), 1.0);
        assert_eq!(bivar_gc_time(&b), 0.0);
    }

    #[test]
    fn hand_checked_special_case() {
        let b = Bivar1Params { a_xx: 0.2, a_xy: 0.5, a_yy: 0.0, sigma_xy: 0.0, sigma_yy: 2.0, ..white() };
        let d = b.derived();
        assert!((d.p - 1.5).abs() < 1e-15 && d.q == 0.0 && (d.v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn antiderivative_is_continuous_and_full_period() {
        for a in [-0.7, 0.0, 0.4, 0.9] {
            let c = 2.0 / (1.0 - a * a);
            assert!((arctan_antiderivative(a, 2.0 * PI) - arctan_antiderivative(a, 0.0) - c * PI).abs() < 1e-12);
            let eps = 1e-9;
            let jump = arctan_antiderivative(a, PI + eps) - arctan_antiderivative(a, PI - eps);
            assert!(jump.abs() < 1e-6);
        }
    }

    #[test]
    fn kappa_limit_shrinks_lambda() {
        let b = Bivar1Params { sigma_xy: 0.999_999, a_yy: 0.5, ..white() };
        assert!(bivar_null_lambda(&b).unwrap() < 1e-5);
    }

    #[test]
    fn grid_model_hits_target() {
        let b = grid_model(0.4, -0.6, 0.9, 1e-4).unwrap();
        assert!((bivar_gc_time(&b) - 1e-4).abs() < 1e-14);
    }
}
