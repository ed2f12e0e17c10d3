//! Granger causality `y → x`: population single-regression statistic,
//! sample likelihood-ratio statistic, spectral and band-limited values.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, DareSolution, Mat};
use crate::quadrature::Rule;
use crate::sampling::{fit_var_ols, TimeSeries};
use crate::var_model::{check_partition, spectral_point, to_complex, Partition, VarParams};

/// Values in `(−GC_FLOOR, 0)` are rounding and are clamped to zero.
pub const GC_FLOOR: f64 = 1e-12;
/// Maximum disagreement between the band rule and its doubled refinement.
pub const BAND_CHECK_TOL: f64 = 1e-8;

/// A frequency interval `[lo, hi] ⊆ [0, 2π]` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub lo: f64,
    pub hi: f64,
}

impl FrequencyBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi <= 2.0 * PI && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "frequency band must satisfy 0 <= lo < hi <= 2pi, got [{lo}, {hi}]"
            )));
        }
        Ok(FrequencyBand { lo, hi })
    }

    pub fn full() -> Self {
        FrequencyBand { lo: 0.0, hi: 2.0 * PI }
    }

    /// Band given in Hz for sampling rate `fs`.
    pub fn from_hz(lo: f64, hi: f64, fs: f64) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling rate must be > 0, got {fs}")));
        }
        FrequencyBand::new(2.0 * PI * lo / fs, 2.0 * PI * hi / fs)
    }

    pub fn measure(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GcKind {
    TimeSr,
    TimeLr,
    Spectral { omega: f64 },
    Band { band: FrequencyBand },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcValue {
    /// Nats, non-negative.
    pub value: f64,
    pub kind: GcKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_warning: Option<String>,
}

impl GcValue {
    fn new(value: f64, kind: GcKind) -> Result<GcValue> {
        Ok(GcValue {
            value: floor(value)?,
            kind,
            quadrature_warning: None,
        })
    }
}

fn floor(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -GC_FLOOR {
        Ok(0.0)
    } else {
        Err(Error::Internal(format!("negative Granger causality {v:e}")))
    }
}

/// Blocks of the reduced Riccati problem on the `y` part of the companion
/// state: `(Ayy, Axy, Syy, Syx, Sxx)`.
pub(crate) struct ReducedBlocks {
    pub ayy: Mat,
    pub axy: Mat,
    pub syy: Mat,
    pub syx: Mat,
    pub sxx: Mat,
}

pub(crate) fn reduced_blocks(model: &VarParams, part: &Partition) -> Result<ReducedBlocks> {
    check_partition(model, part)?;
    let (n, p, nx, ny) = (model.n(), model.p(), part.nx, part.ny);
    let m = p * ny;
    let a = model.a();
    let s = model.sigma();

    let mut ayy_row = Mat::zeros(ny, m);
    let mut axy = Mat::zeros(nx, m);
    for k in 0..p {
        for j in 0..ny {
            for i in 0..ny {
                ayy_row[(i, k * ny + j)] = a[(nx + i, k * n + nx + j)];
            }
            for i in 0..nx {
                axy[(i, k * ny + j)] = a[(i, k * n + nx + j)];
            }
        }
    }
    let ayy = linalg::companion_matrix(&ayy_row)?;
    let mut syy = Mat::zeros(m, m);
    syy.view_mut((0, 0), (ny, ny)).copy_from(&s.view((nx, nx), (ny, ny)));
    let mut syx = Mat::zeros(m, nx);
    syx.view_mut((0, 0), (ny, nx)).copy_from(&s.view((nx, 0), (ny, nx)));
    let sxx = s.view((0, 0), (nx, nx)).into_owned();
    Ok(ReducedBlocks { ayy, axy, syy, syx, sxx })
}

/// Solution of the reduced Riccati equation for the `x`-only predictor.
pub fn reduced_dare(model: &VarParams, part: &Partition) -> Result<DareSolution> {
    let b = reduced_blocks(model, part)?;
    linalg::solve_dare(&b.ayy, &b.axy, &b.syy, &b.syx, &b.sxx)
}

/// Residual covariance `Σʳ` of the optimal `x`-only predictor.
pub fn reduced_sigma(model: &VarParams, part: &Partition) -> Result<Mat> {
    Ok(reduced_dare(model, part)?.sigma_r)
}

/// `F = log|Σʳ| − log|Σ_xx|`.
pub fn gc_time_sr(model: &VarParams, part: &Partition) -> Result<GcValue> {
    let sigma_r = reduced_sigma(model, part)?;
    let sxx = model.sigma().view((0, 0), (part.nx, part.nx)).into_owned();
    let v = linalg::log_det_pd(&sigma_r)? - linalg::log_det_pd(&sxx)?;
    GcValue::new(v, GcKind::TimeSr)
}

/// Sample statistic comparing the order-`p` `x`-only regression with the
/// full order-`p` fit.
pub fn gc_time_lr(data: &TimeSeries, p: usize, part: &Partition) -> Result<GcValue> {
    if data.n() != part.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} variables but the data has {}",
            part.n(),
            data.n()
        )));
    }
    let full = fit_var_ols(data, p)?;
    let xcols: Vec<usize> = part.x().collect();
    let reduced = fit_var_ols(&data.columns(&xcols)?, p)?;
    let sxx = full.sigma().view((0, 0), (part.nx, part.nx)).into_owned();
    let ld_r = linalg::log_det_pd(reduced.sigma()).map_err(|_| Error::RankDeficient)?;
    let ld_f = linalg::log_det_pd(&sxx).map_err(|_| Error::RankDeficient)?;
    GcValue::new(ld_r - ld_f, GcKind::TimeLr)
}

/// `Σ_{yy|x} = Σ_yy − Σ_yx Σ_xx⁻¹ Σ_xy`.
pub fn partial_sigma_yy(model: &VarParams, part: &Partition) -> Result<Mat> {
    check_partition(model, part)?;
    let s = model.sigma();
    let (nx, ny) = (part.nx, part.ny);
    let sxx = s.view((0, 0), (nx, nx)).into_owned();
    let syx = s.view((nx, 0), (ny, nx)).into_owned();
    let syy = s.view((nx, nx), (ny, ny)).into_owned();
    let inv = linalg::inverse_pd(&sxx)?;
    Ok(linalg::symmetrize(&(syy - &syx * inv * syx.transpose())))
}

fn spectral_value(model: &VarParams, part: &Partition, syy_x: &CMat, omega: f64) -> Result<f64> {
    let sp = spectral_point(model, omega)?;
    let (nx, ny) = (part.nx, part.ny);
    let sxx = sp.s.view((0, 0), (nx, nx)).into_owned();
    let psi_xy = sp.psi.view((0, nx), (nx, ny)).into_owned();
    let resid = &sxx - &psi_xy * syy_x * psi_xy.adjoint();
    let a = linalg::log_det_hpd(&sxx).ok_or(Error::SingularSpectrum { omega })?;
    let b = linalg::log_det_hpd(&resid).ok_or(Error::SingularSpectrum { omega })?;
    Ok(a - b)
}

/// Spectral GC `f(ω) = log|S_xx| − log|S_xx − Ψ_xy Σ_{yy|x} Ψ_xy*|`.
pub fn gc_spectral(model: &VarParams, part: &Partition, omega: f64) -> Result<GcValue> {
    let syy_x = to_complex(&partial_sigma_yy(model, part)?);
    let v = spectral_value(model, part, &syy_x, omega)?;
    GcValue::new(v, GcKind::Spectral { omega })
}

/// Band average `(1/|F|) ∫_F f(ω) dω` by composite Gauss-Legendre; a
/// warning is attached if the doubled rule disagrees by more than
/// [`BAND_CHECK_TOL`].
///
/// Over the full circle this equals [`gc_time_sr`] when the `x` block of
/// the normalised transfer function has no zeros inside the unit disc; each
/// zero `z` inside lowers the average by `2 ln(1/|z|)`.
pub fn gc_band(model: &VarParams, part: &Partition, band: &FrequencyBand) -> Result<GcValue> {
    let syy_x = to_complex(&partial_sigma_yy(model, part)?);
    let average = |rule: &Rule| -> Result<f64> {
        let mut acc = 0.0;
        for (&w, &h) in rule.nodes.iter().zip(&rule.weights) {
            acc += h * spectral_value(model, part, &syy_x, w)?;
        }
        Ok(acc / band.measure())
    };
    let v = average(&Rule::band(band.lo, band.hi, false))?;
    let v2 = average(&Rule::band(band.lo, band.hi, true))?;
    let mut out = GcValue::new(v, GcKind::Band { band: *band })?;
    if (v - v2).abs() > BAND_CHECK_TOL {
        let msg = format!("band quadrature unresolved: |F_2048 - F_4096| = {:e}", (v - v2).abs());
        log::warn!("{msg}");
        out.quadrature_warning = Some(msg);
    }
    Ok(out)
}
