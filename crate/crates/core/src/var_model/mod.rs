//! VAR(p) models: parameters, the companion form, autocovariance, transfer
//! function and cross-power spectral density.

mod io;
mod random;

pub use io::{read_model_file, write_model_file, ModelFile};
pub use random::{
    log_generalised_correlation, random_correlation, random_var, GenMode, CHOP_TOL, COEF_DECAY_W,
    MAX_RETRIES,
};

use std::ops::Range;

use nalgebra::DMatrixView;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};

/// Split of the variables into a target block `x` (first `nx`) and a
/// source block `y` (last `ny`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub nx: usize,
    pub ny: usize,
}

impl Partition {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "partition blocks must be non-empty (nx={nx}, ny={ny})"
            )));
        }
        Ok(Partition { nx, ny })
    }

    /// Partition of `n` variables with the first `nx` as targets.
    pub fn split(n: usize, nx: usize) -> Result<Self> {
        if nx >= n {
            return Err(Error::InvalidArgument(format!(
                "partition nx={nx} leaves no source variables out of n={n}"
            )));
        }
        Partition::new(nx, n - nx)
    }

    pub fn n(&self) -> usize {
        self.nx + self.ny
    }

    pub fn x(&self) -> Range<usize> {
        0..self.nx
    }

    pub fn y(&self) -> Range<usize> {
        self.nx..self.n()
    }
}

/// VAR(p) parameters `(A, Σ)` with `A = [A_1 … A_p]` an `n x pn` block row.
///
/// [`VarParams::from_parts`] only checks shapes, so fitted estimates that are
/// unstable or have a singular residual covariance can still be carried
/// around; [`VarParams::new`] additionally enforces stability and positive
/// definiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    pub(crate) a: Mat,
    pub(crate) sigma: Mat,
}

impl VarParams {
    pub fn from_parts(a: Mat, sigma: Mat) -> Result<Self> {
        let n = sigma.nrows();
        if n == 0 || !sigma.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Sigma must be square and non-empty, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if a.nrows() != n || a.ncols() == 0 || !a.ncols().is_multiple_of(n) {
            return Err(Error::DimensionMismatch(format!(
                "A must be {n} x pn with p >= 1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter entries".into()));
        }
        Ok(VarParams { a, sigma })
    }

    pub fn new(a: Mat, sigma: Mat) -> Result<Self> {
        let m = Self::from_parts(a, sigma)?;
        m.validate()?;
        Ok(m)
    }

    /// Checks stability and that `Σ` is symmetric positive-definite.
    pub fn validate(&self) -> Result<()> {
        let rho = self.spectral_radius();
        if !(rho < 1.0) {
            return Err(Error::InvalidModel(format!(
                "spectral radius must be < 1, got {rho}"
            )));
        }
        self.check_sigma()
    }

    pub(crate) fn check_sigma(&self) -> Result<()> {
        if !linalg::is_symmetric(&self.sigma, 1e-10) {
            return Err(Error::InvalidModel("Sigma must be symmetric".into()));
        }
        if linalg::cholesky_right(&self.sigma).is_err() {
            return Err(Error::InvalidModel("Sigma must be positive-definite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols() / self.n()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn sigma(&self) -> &Mat {
        &self.sigma
    }

    /// Coefficient matrix `A_k`, `k = 1..=p`.
    pub fn coef(&self, k: usize) -> DMatrixView<'_, f64> {
        assert!(k >= 1 && k <= self.p(), "lag {k} out of range 1..={}", self.p());
        let n = self.n();
        self.a.view((0, (k - 1) * n), (n, n))
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius_companion(&self.a)
    }

    /// `Ok` if every `A_k[x, y]` block is exactly zero.
    pub fn check_null(&self, part: &Partition) -> Result<()> {
        check_partition(self, part)?;
        for k in 1..=self.p() {
            let c = self.coef(k);
            for i in part.x() {
                for j in part.y() {
                    if c[(i, j)] != 0.0 {
                        return Err(Error::NotNull {
                            lag: k,
                            row: i,
                            col: j,
                            value: c[(i, j)],
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_null(&self, part: &Partition) -> bool {
        self.check_null(part).is_ok()
    }
}

pub(crate) fn check_partition(model: &VarParams, part: &Partition) -> Result<()> {
    if part.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} variables but the model has {}",
            part.n(),
            model.n()
        )));
    }
    Ok(())
}

/// The `pn x pn` companion matrix.
pub fn companion(model: &VarParams) -> Mat {
    linalg::companion_matrix(&model.a).expect("VarParams holds a valid block row")
}

/// The `pn x pn` companion residual covariance: `Σ` in the top-left block.
pub fn companion_sigma(model: &VarParams) -> Mat {
    let (n, pn) = (model.n(), model.a.ncols());
    let mut s = Mat::zeros(pn, pn);
    s.view_mut((0, 0), (n, n)).copy_from(&model.sigma);
    s
}

/// Stacked autocovariance `Γ` of the companion process; block `(k, l)` is
/// `Γ_{l−k}`.
#[derive(Debug, Clone)]
pub struct Autocovariance {
    pub n: usize,
    pub p: usize,
    pub gamma: Mat,
}

impl Autocovariance {
    /// `Γ_k = E[u_t u_{t−k}ᵀ]` for `|k| < p`.
    pub fn lag(&self, k: isize) -> Mat {
        let n = self.n;
        let m = k.unsigned_abs();
        assert!(m < self.p, "lag {k} not stored (p = {})", self.p);
        let block = self.gamma.view((0, m * n), (n, n)).into_owned();
        if k >= 0 {
            block
        } else {
            block.transpose()
        }
    }
}

/// Solves `Γ − 𝐀 Γ 𝐀ᵀ = 𝚺` for the companion autocovariance.
pub fn autocovariance(model: &VarParams) -> Result<Autocovariance> {
    let gamma = linalg::solve_dlyap(&companion(model), &companion_sigma(model))?;
    Ok(Autocovariance {
        n: model.n(),
        p: model.p(),
        gamma,
    })
}

/// Transfer-function quantities at one angular frequency.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    pub omega: f64,
    /// `Φ(ω) = I − Σ_k A_k e^{−iωk}`
    pub phi: CMat,
    /// `Ψ(ω) = Φ(ω)⁻¹`
    pub psi: CMat,
    /// `S(ω) = Ψ Σ Ψ*`
    pub s: CMat,
}

pub(crate) fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `Φ(ω) = I − Σ_k A_k e^{−iωk}` for a coefficient sequence given as a
/// block row (square blocks of size `a.nrows()`).
pub(crate) fn inverse_transfer(a: &Mat, omega: f64) -> CMat {
    let n = a.nrows();
    let p = a.ncols() / n;
    let mut phi = CMat::identity(n, n);
    for k in 1..=p {
        let z = Complex64::from_polar(1.0, -omega * k as f64);
        let block = a.view((0, (k - 1) * n), (n, n));
        for j in 0..n {
            for i in 0..n {
                phi[(i, j)] -= z * block[(i, j)];
            }
        }
    }
    phi
}

pub fn spectral_point(model: &VarParams, omega: f64) -> Result<SpectralPoint> {
    let phi = inverse_transfer(&model.a, omega);
    let psi = phi
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularPhi { omega })?;
    let s = &psi * to_complex(&model.sigma) * psi.adjoint();
    let s = (&s + s.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(SpectralPoint { omega, phi, psi, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_stable_model(rng: &mut ChaCha12Rng, n: usize, p: usize, rho: f64) -> VarParams {
        let a = Mat::from_fn(n, n * p, |_, _| rng.random_range(-1.0..1.0));
        let r = linalg::spectral_radius_companion(&a);
        let lam = rho / r;
        let mut a = a;
        for k in 1..=p {
            let mut blk = a.view_mut((0, (k - 1) * n), (n, n));
            blk *= lam.powi(k as i32);
        }
        let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sigma = &b * b.transpose() + Mat::identity(n, n) * 0.2;
        VarParams::new(a, sigma).unwrap()
    }

    #[test]
    fn companion_textbook_forms() {
        let m = VarParams::new(Mat::from_row_slice(1, 2, &[0.3, 0.2]), Mat::identity(1, 1)).unwrap();
        assert_eq!(companion(&m), Mat::from_row_slice(2, 2, &[0.3, 0.2, 1.0, 0.0]));
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let m1 = random_stable_model(&mut rng, 3, 1, 0.5);
        assert_eq!(companion(&m1), m1.a().clone());
    }

    #[test]
    fn white_noise_autocovariance_is_identity() {
        let m = VarParams::new(Mat::zeros(3, 3), Mat::identity(3, 3)).unwrap();
        let g = autocovariance(&m).unwrap();
        assert!((g.lag(0) - Mat::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn autocovariance_satisfies_yule_walker() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &(n, p) in &[(2, 3), (3, 4), (5, 8), (4, 10)] {
            let m = random_stable_model(&mut rng, n, p, 0.9);
            let g = autocovariance(&m).unwrap();
            let scale = g.gamma.amax();
            for k in 0..p as isize {
                let mut rhs = if k == 0 { m.sigma().clone() } else { Mat::zeros(n, n) };
                for l in 1..=p {
                    let lag = k - l as isize;
                    if lag.unsigned_abs() < p {
                        rhs += m.coef(l) * g.lag(lag);
                    } else {
                        // Γ_{−p} lies outside the stored blocks; it follows from
                        // the k = 0 relation Γ_p = Σ_l A_l Γ_{p−l}.
                        let mut gp = Mat::zeros(n, n);
                        for l2 in 1..=p {
                            gp += m.coef(l2) * g.lag(p as isize - l2 as isize);
                        }
                        rhs += m.coef(l) * gp.transpose();
                    }
                }
                assert!((g.lag(k) - rhs).amax() <= 1e-9 * scale, "n={n} p={p} k={k}");
            }
        }
    }

    #[test]
    fn spectral_point_identities() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let m = random_stable_model(&mut rng, 4, 3, 0.8);
        for _ in 0..64 {
            let w = rng.random_range(0.0..2.0 * PI);
            let sp = spectral_point(&m, w).unwrap();
            let id = &sp.phi * &sp.psi;
            assert!((id - CMat::identity(4, 4)).camax() < 1e-10);
            assert!((&sp.s - sp.s.adjoint()).camax() < 1e-12);
        }
    }

    #[test]
    fn white_noise_spectrum_and_scalar_filter_gain() {
        let sigma = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = VarParams::new(Mat::zeros(2, 2), sigma.clone()).unwrap();
        let sp = spectral_point(&m, 1.3).unwrap();
        assert!((sp.s.map(|z| z.re) - sigma).amax() < 1e-15);
        assert!((sp.psi - CMat::identity(2, 2)).camax() < 1e-15);

        let ar = VarParams::new(Mat::from_element(1, 1, 0.5), Mat::identity(1, 1)).unwrap();
        let s0 = spectral_point(&ar, 0.0).unwrap().s[(0, 0)];
        assert_relative_eq!(s0.re, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn spectrum_integrates_to_lag_zero_autocovariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let m = random_stable_model(&mut rng, 3, 2, 0.7);
        let g0 = autocovariance(&m).unwrap().lag(0);
        // Trapezoid on a periodic integrand.
        let npts = 2048;
        let mut acc = Mat::zeros(3, 3);
        for i in 0..npts {
            let w = 2.0 * PI * i as f64 / npts as f64;
            acc += spectral_point(&m, w).unwrap().s.map(|z| z.re);
        }
        acc /= npts as f64;
        assert!((acc - g0).amax() < 1e-6);
    }

    #[test]
    fn null_check_reports_offending_entry() {
        let part = Partition::new(1, 1).unwrap();
        let a = Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let m = VarParams::new(a, Mat::identity(2, 2)).unwrap();
        match m.check_null(&part) {
            Err(Error::NotNull { lag: 1, row: 0, col: 1, value }) => assert_eq!(value, 0.1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            VarParams::new(Mat::from_element(1, 1, 1.2), Mat::identity(1, 1)),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            VarParams::new(Mat::zeros(2, 2), Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            VarParams::from_parts(Mat::zeros(2, 3), Mat::identity(2, 2)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(Partition::split(3, 3).is_err());
    }
}
