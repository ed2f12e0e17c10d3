//! Asymptotic null laws of the single-regression estimator: generalised χ²
//! weights (time domain and band limited), moments, the moment-matched Γ
//! approximation, CDF and quantiles.

mod imhof;

pub use imhof::{imhof_cdf, ImhofResult, CDF_TOL};

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{ChiSquared as ChiSquaredDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::gc::{partial_sigma_yy, reduced_blocks, FrequencyBand};
use crate::linalg::{self, CMat, Mat};
use crate::quadrature::Rule;
use crate::rng::Seed;
use crate::var_model::{autocovariance, inverse_transfer, to_complex, Partition, VarParams};

/// Band weights in `(−BAND_WEIGHT_FLOOR·λ_max, 0)` are rounding and clamped to 0.
pub const BAND_WEIGHT_FLOOR: f64 = 1e-10;
/// Weights below `λ_max · DROP_RATIO` are ignored when evaluating the CDF.
pub const DROP_RATIO: f64 = 1e-12;
/// Sample size of the Monte Carlo CDF fallback.
pub const MC_FALLBACK_SAMPLES: usize = 10_000_000;
const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Time,
    Band,
}

/// Law of `Σ_i λ_i W_i` with `W_i` iid χ²(multiplicity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRepr", into = "LawRepr")]
pub struct GenChi2 {
    weights: Vec<f64>,
    multiplicity: usize,
    kind: LawKind,
    band: Option<FrequencyBand>,
}

#[derive(Serialize, Deserialize)]
struct LawRepr {
    weights: Vec<f64>,
    multiplicity: usize,
    kind: LawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band: Option<[f64; 2]>,
}

impl TryFrom<LawRepr> for GenChi2 {
    type Error = Error;

    fn try_from(r: LawRepr) -> Result<Self> {
        let band = r.band.map(|[lo, hi]| FrequencyBand::new(lo, hi)).transpose()?;
        GenChi2::new(r.weights, r.multiplicity, r.kind, band)
    }
}

impl From<GenChi2> for LawRepr {
    fn from(g: GenChi2) -> Self {
        LawRepr {
            weights: g.weights,
            multiplicity: g.multiplicity,
            kind: g.kind,
            band: g.band.map(|b| [b.lo, b.hi]),
        }
    }
}

impl GenChi2 {
    /// Weights are sorted descending. Time-domain laws need strictly
    /// positive weights, band laws non-negative ones.
    pub fn new(mut weights: Vec<f64>, multiplicity: usize, kind: LawKind, band: Option<FrequencyBand>) -> Result<Self> {
        if weights.is_empty() || multiplicity == 0 {
            return Err(Error::InvalidArgument("law needs at least one weight and multiplicity >= 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if kind == LawKind::Time && weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument("time-domain weights must be positive".into()));
        }
        if kind == LawKind::Band && band.is_none() {
            return Err(Error::InvalidArgument("band law without a band".into()));
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        Ok(GenChi2 { weights, multiplicity, kind, band })
    }

    /// χ²(d) as a law: `d` unit weights of multiplicity 1.
    pub fn chi_squared(d: usize) -> Result<Self> {
        GenChi2::new(vec![1.0; d], 1, LawKind::Time, None)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn band(&self) -> Option<FrequencyBand> {
        self.band
    }

    pub fn max_weight(&self) -> f64 {
        self.weights[0]
    }

    /// One draw of `Σ λ_i W_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let chi = ChiSquaredDist::new(self.multiplicity as f64).expect("positive dof");
        self.weights.iter().map(|&l| l * chi.sample(rng)).sum()
    }
}

/// Reads a bare law, or any JSON object holding one under `"law"`.
pub fn read_law_file(path: &Path) -> Result<GenChi2> {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if let Some(inner) = v.get_mut("law") {
        v = inner.take();
    }
    Ok(serde_json::from_value(v)?)
}

/// `[Γ⁻¹]_yy`: the `y` rows and columns, at every lag, of the inverse
/// companion autocovariance.
fn inverse_autocov_yy(model: &VarParams, part: &Partition) -> Result<Mat> {
    let (n, p) = (model.n(), model.p());
    let gamma = autocovariance(model)?.gamma;
    let inv = linalg::inverse_pd(&gamma)?;
    let idx: Vec<usize> = (0..p).flat_map(|k| part.y().map(move |j| k * n + j)).collect();
    Ok(inv.select_rows(&idx).select_columns(&idx))
}

/// Eigenvalues of `B·G` via the symmetric similarity `R G Rᵀ`, `RᵀR = B`.
fn similarity_weights(b: &Mat, g: &Mat) -> Result<Vec<f64>> {
    let r = linalg::cholesky_right(b)?;
    linalg::symmetric_eigenvalues(&(&r * g * r.transpose()))
}

/// Theorem-1 law of `N·F̂` at a null model: weights are the eigenvalues of
/// `[Γ⁻¹]_yy Γ_{yy|x}`, each repeated `n_x` times.
pub fn null_weights_time(model: &VarParams, part: &Partition) -> Result<GenChi2> {
    model.check_null(part)?;
    let blocks = reduced_blocks(model, part)?;
    let (ny, m) = (part.ny, blocks.ayy.nrows());
    let mut q = Mat::zeros(m, m);
    q.view_mut((0, 0), (ny, ny)).copy_from(&partial_sigma_yy(model, part)?);
    let g = linalg::solve_dlyap(&blocks.ayy, &q)?;
    let b = inverse_autocov_yy(model, part)?;
    let w = similarity_weights(&b, &g)?;
    if let Some(bad) = w.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Internal(format!("non-positive time-domain weight {bad:e}")));
    }
    GenChi2::new(w, part.nx, LawKind::Time, None)
}

/// Band average of `Z(ω) ⊗ S_{yy|x}(ω)` (real part): block `(k, k')` is
/// `Re C_{k−k'}` with `C_d = avg_F S_{yy|x}(ω) e^{−iωd}`.
fn band_spectrum_yy(model: &VarParams, part: &Partition, band: &FrequencyBand, refine: bool) -> Result<Mat> {
    let blocks = reduced_blocks(model, part)?;
    let (ny, p) = (part.ny, model.p());
    let ayy_row = blocks.ayy.rows(0, ny).into_owned();
    let syy_x = to_complex(&partial_sigma_yy(model, part)?);
    let rule = Rule::band(band.lo, band.hi, refine);
    let mut c = vec![CMat::zeros(ny, ny); p];
    for (&w, &h) in rule.nodes.iter().zip(&rule.weights) {
        let psi = inverse_transfer(&ayy_row, w)
            .try_inverse()
            .ok_or(Error::SingularPhi { omega: w })?;
        let s = &psi * &syy_x * psi.adjoint();
        for (d, cd) in c.iter_mut().enumerate() {
            let z = num_complex::Complex64::from_polar(h, -w * d as f64);
            *cd += &s * z;
        }
    }
    let mut out = Mat::zeros(p * ny, p * ny);
    for k in 0..p {
        for l in 0..p {
            let blk = if k >= l {
                c[k - l].map(|z| z.re)
            } else {
                c[l - k].map(|z| z.re).transpose()
            };
            out.view_mut((k * ny, l * ny), (ny, ny)).copy_from(&blk);
        }
    }
    Ok(linalg::symmetrize(&(out / band.measure())))
}

/// Theorem-2 law of `N·F̂(F)` for the band-limited estimator at a null model.
pub fn null_weights_band(model: &VarParams, part: &Partition, band: &FrequencyBand) -> Result<GenChi2> {
    model.check_null(part)?;
    let b = inverse_autocov_yy(model, part)?;
    let s = band_spectrum_yy(model, part, band, false)?;
    let mut w = similarity_weights(&b, &s)?;
    let scale = w.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::DegenerateLaw);
    }
    for l in w.iter_mut() {
        if *l < 0.0 {
            if *l > -BAND_WEIGHT_FLOOR * scale {
                *l = 0.0;
            } else {
                return Err(Error::Internal(format!("negative band weight {l:e}")));
            }
        }
    }
    let fine = similarity_weights(&b, &band_spectrum_yy(model, part, band, true)?)?;
    let drift = w.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if drift > 1e-8 * scale {
        log::warn!("band weights not resolved by quadrature: drift {drift:e}");
    }
    GenChi2::new(w, part.nx, LawKind::Band, Some(*band))
}

/// `(μ, σ²) = (h Σλ, 2h Σλ²)`.
pub fn genchi2_moments(law: &GenChi2) -> (f64, f64) {
    let h = law.multiplicity as f64;
    let s1: f64 = law.weights.iter().sum();
    let s2: f64 = law.weights.iter().map(|l| l * l).sum();
    (h * s1, 2.0 * h * s2)
}

/// Moment-matched Γ distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaApprox {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl GammaApprox {
    fn dist(&self) -> Gamma {
        Gamma::new(self.alpha, 1.0 / self.beta).expect("validated shape and scale")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.dist().cdf(x)
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.dist().inverse_cdf(q)
    }
}

pub fn gamma_approx(law: &GenChi2) -> Result<GammaApprox> {
    let (mu, sigma2) = genchi2_moments(law);
    if !(mu > 0.0) {
        return Err(Error::DegenerateLaw);
    }
    Ok(GammaApprox {
        alpha: mu * mu / sigma2,
        beta: sigma2 / mu,
        mu,
        sigma2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfMethod {
    /// All retained weights equal: a scaled χ².
    Exact,
    Imhof,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfValue {
    pub value: f64,
    pub method: CdfMethod,
    /// Certified bound for `Exact`/`Imhof`; standard error for `MonteCarlo`.
    pub error: f64,
}

/// Retained weights and the mean mass `h Σ λ` of the dropped ones.
fn effective_weights(law: &GenChi2) -> Result<(Vec<f64>, f64)> {
    let top = law.max_weight();
    if !(top > 0.0) {
        return Err(Error::DegenerateLaw);
    }
    let cut = top * DROP_RATIO;
    let kept: Vec<f64> = law.weights.iter().copied().filter(|&l| l >= cut).collect();
    let dropped: f64 = law
        .weights
        .iter()
        .filter(|&&l| l > 0.0 && l < cut)
        .sum::<f64>()
        * law.multiplicity as f64;
    if dropped > 0.0 {
        log::warn!("ignoring weights below {cut:e}; dropped mean mass {dropped:e}");
    }
    Ok((kept, dropped))
}

fn analytic_cdf(law: &GenChi2, x: f64) -> Result<CdfValue> {
    let (w, _) = effective_weights(law)?;
    let h = law.multiplicity as f64;
    if x <= 0.0 {
        return Ok(CdfValue { value: 0.0, method: CdfMethod::Exact, error: 0.0 });
    }
    let (lo, hi) = (w[w.len() - 1], w[0]);
    if hi - lo <= 1e-12 * hi {
        let chi = ChiSquared::new(h * w.len() as f64).expect("positive dof");
        return Ok(CdfValue {
            value: chi.cdf(x / hi),
            method: CdfMethod::Exact,
            error: 0.0,
        });
    }
    let r = imhof_cdf(&w, h, x)?;
    Ok(CdfValue {
        value: r.value,
        method: CdfMethod::Imhof,
        error: r.error_bound,
    })
}

/// `P(Q ≤ x)` to absolute accuracy [`CDF_TOL`]; `AccuracyNotMet` if the
/// inversion cannot certify it.
pub fn genchi2_cdf(law: &GenChi2, x: f64) -> Result<f64> {
    Ok(analytic_cdf(law, x)?.value)
}

/// As [`genchi2_cdf`], falling back to a seeded Monte Carlo estimate with
/// its standard error when the inversion cannot be certified.
pub fn genchi2_cdf_detailed(law: &GenChi2, x: f64, seed: Seed) -> Result<CdfValue> {
    match analytic_cdf(law, x) {
        Err(Error::AccuracyNotMet { bound }) => {
            log::warn!("CDF inversion uncertified (bound {bound:e}); using Monte Carlo");
            Ok(monte_carlo_cdf(law, x, MC_FALLBACK_SAMPLES, seed))
        }
        other => other,
    }
}

pub fn monte_carlo_cdf(law: &GenChi2, x: f64, samples: usize, seed: Seed) -> CdfValue {
    let mut rng = seed.rng();
    let hits = (0..samples).filter(|_| law.sample(&mut rng) <= x).count();
    let p = hits as f64 / samples as f64;
    CdfValue {
        value: p,
        method: CdfMethod::MonteCarlo,
        error: (p * (1.0 - p) / samples as f64).sqrt(),
    }
}

/// `x` with `P(Q ≤ x) = q`, by bracketing from the Γ approximation and
/// Illinois-modified regula falsi.
pub fn genchi2_quantile(law: &GenChi2, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let g = gamma_approx(law)?;
    let start = g.quantile(q);
    let start = if start.is_finite() && start > 0.0 { start } else { g.mu };
    let f = |x: f64| genchi2_cdf(law, x).map(|c| c - q);

    let (mut lo, mut hi) = (start, start);
    let mut f_lo = f(lo)?;
    let mut f_hi = f_lo;
    let mut guard = 0;
    while f_lo > 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = f(lo)?;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NonConvergent("quantile bracket".into()));
        }
    }
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = f(hi)?;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NonConvergent("quantile bracket".into()));
        }
    }
    if f_lo.abs() <= QUANTILE_TOL {
        return Ok(lo);
    }
    if f_hi.abs() <= QUANTILE_TOL {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() <= QUANTILE_TOL || (hi - lo) <= 1e-14 * hi {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NonConvergent(format!("quantile at level {q}")))
}
