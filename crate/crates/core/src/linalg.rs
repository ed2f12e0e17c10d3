//! Dense kernels: eigenvalues, Cholesky, and the discrete Lyapunov and
//! algebraic Riccati solvers used by the autocovariance and reduced-model
//! computations.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative residual tolerance for the Lyapunov and Riccati post-conditions.
pub const SOLVER_RTOL: f64 = 1e-10;
/// A matrix with spectral radius at or above `1 - STABILITY_EPS` is treated as unstable.
pub const STABILITY_EPS: f64 = 1e-9;
/// Relative tolerance for accepting a matrix as symmetric/Hermitian.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Largest dimension solved through the vectorized `(I - A⊗A) vec(P) = vec(Q)` system.
pub const KRONECKER_MAX_DIM: usize = 16;

const DARE_STEP_TOL: f64 = 1e-12;
const DARE_MAX_ITER: usize = 10_000;
const DOUBLING_MAX_ITER: usize = 128;

/// Maximum absolute row sum.
pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Mat, rtol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rtol * scale
}

fn check_square(m: &Mat, what: &str) -> Result<usize> {
    if m.nrows() == 0 || !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    Ok(m.nrows())
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    check_square(m, "matrix")?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NonConvergent("real Schur decomposition".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Maximum modulus of the eigenvalues of `m`.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Builds the `pn x pn` companion matrix of a coefficient block row `[A_1 ... A_p]`.
pub fn companion_matrix(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n == 0 || a.ncols() == 0 || !a.ncols().is_multiple_of(n) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient block row must be n x pn, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let pn = a.ncols();
    let mut c = Mat::zeros(pn, pn);
    c.view_mut((0, 0), (n, pn)).copy_from(a);
    for i in n..pn {
        c[(i, i - n)] = 1.0;
    }
    Ok(c)
}

/// Spectral radius of the companion matrix of `a` (`n x pn`).
///
/// Returns `f64::INFINITY` if `a` is not a valid block row or the eigen
/// decomposition breaks down, so that callers treat it as unstable.
pub fn spectral_radius_companion(a: &Mat) -> f64 {
    companion_matrix(a)
        .and_then(|c| spectral_radius(&c))
        .unwrap_or(f64::INFINITY)
}

/// Real eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    check_square(m, "matrix")?;
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NonConvergent("symmetric eigen decomposition".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Upper-triangular `R` with `RᵀR = B`.
pub fn cholesky_right(b: &Mat) -> Result<Mat> {
    check_square(b, "matrix")?;
    let chol = symmetrize(b)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{}x{} matrix", b.nrows(), b.ncols())))?;
    Ok(chol.l().transpose())
}

/// `log |B|` for symmetric positive-definite `B`.
pub fn log_det_pd(b: &Mat) -> Result<f64> {
    let r = cholesky_right(b)?;
    Ok(2.0 * r.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inverse_pd(b: &Mat) -> Result<Mat> {
    check_square(b, "matrix")?;
    let chol = symmetrize(b)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{}x{} matrix", b.nrows(), b.ncols())))?;
    Ok(symmetrize(&chol.inverse()))
}

/// `log |H|` for a Hermitian positive-definite complex matrix.
pub fn log_det_hpd(h: &CMat) -> Option<f64> {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = sym.cholesky()?;
    let l = chol.l();
    Some(2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// Residual `‖P − A P Aᵀ − Q‖∞`.
pub fn dlyap_residual(a: &Mat, q: &Mat, p: &Mat) -> f64 {
    inf_norm(&(p - a * p * a.transpose() - q))
}

/// Solves `P − A P Aᵀ = Q` for a stable `A`.
///
/// Small systems use the vectorized direct solve; larger ones use Smith
/// doubling followed by one refinement sweep if the residual is above
/// [`SOLVER_RTOL`].
pub fn solve_dlyap(a: &Mat, q: &Mat) -> Result<Mat> {
    let m = check_square(a, "A")?;
    if check_square(q, "Q")? != m {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}x{m} but Q is {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let radius = spectral_radius(a)?;
    if radius >= 1.0 - STABILITY_EPS {
        return Err(Error::NonConvergent(format!(
            "DLYAP requires a stable matrix, spectral radius is {radius}"
        )));
    }
    let q = symmetrize(q);
    if m <= KRONECKER_MAX_DIM {
        dlyap_kronecker(a, &q)
    } else {
        dlyap_doubling(a, &q)
    }
}

/// Direct solve of the vectorized Lyapunov system. No stability check.
pub fn dlyap_kronecker(a: &Mat, q: &Mat) -> Result<Mat> {
    let m = a.nrows();
    let mm = m * m;
    // Column-major vec: vec(A P Aᵀ) = (A ⊗ A) vec(P).
    let mut sys = Mat::identity(mm, mm);
    for l in 0..m {
        for k in 0..m {
            let col = k + l * m;
            for j in 0..m {
                let ajl = a[(j, l)];
                if ajl == 0.0 {
                    continue;
                }
                for i in 0..m {
                    sys[(i + j * m, col)] -= a[(i, k)] * ajl;
                }
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonConvergent("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&Mat::from_column_slice(m, m, sol.as_slice())))
}

/// Smith doubling: `P ← P + Aₖ P Aₖᵀ`, `Aₖ ← Aₖ²`. No stability check.
pub fn dlyap_doubling(a: &Mat, q: &Mat) -> Result<Mat> {
    let mut p = doubling_pass(a, q)?;
    let scale = inf_norm(q).max(f64::MIN_POSITIVE);
    if dlyap_residual(a, q, &p) > SOLVER_RTOL * scale {
        let r = symmetrize(&(q - (&p - a * &p * a.transpose())));
        p += doubling_pass(a, &r)?;
        p = symmetrize(&p);
    }
    Ok(p)
}

fn doubling_pass(a: &Mat, q: &Mat) -> Result<Mat> {
    let mut p = q.clone();
    let mut ak = a.clone();
    for _ in 0..DOUBLING_MAX_ITER {
        let incr = &ak * &p * ak.transpose();
        let incr_norm = inf_norm(&incr);
        p += incr;
        let p_norm = inf_norm(&p);
        if !p_norm.is_finite() {
            return Err(Error::NonConvergent("DLYAP doubling diverged".into()));
        }
        if incr_norm <= 1e-3 * f64::EPSILON * p_norm {
            return Ok(symmetrize(&p));
        }
        ak = &ak * &ak;
    }
    Err(Error::NonConvergent(format!(
        "DLYAP doubling did not settle in {DOUBLING_MAX_ITER} squarings"
    )))
}

/// Solution of the reduced-dimension Riccati equation
///
/// ```text
/// P − Ayy P Ayyᵀ = Syy − K Σʳ Kᵀ
/// Σʳ = Axy P Axyᵀ + Sxx
/// K  = (Ayy P Axyᵀ + Syx) [Σʳ]⁻¹
/// ```
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: Mat,
    pub sigma_r: Mat,
    pub gain: Mat,
    pub iterations: usize,
}

impl DareSolution {
    /// Relative residual of the first identity, `‖P − Ayy P Ayyᵀ − Syy + K Σʳ Kᵀ‖∞ / ‖P‖∞`.
    pub fn residual(&self, ayy: &Mat, syy: &Mat) -> f64 {
        let lhs = &self.p - ayy * &self.p * ayy.transpose();
        let rhs = syy - &self.gain * &self.sigma_r * self.gain.transpose();
        inf_norm(&(lhs - rhs)) / inf_norm(&self.p).max(f64::MIN_POSITIVE)
    }
}

/// Fixed-point iteration of the Riccati recursion started from the
/// `Axy = 0` Lyapunov solution. When `Ayy` alone is unstable that solution
/// does not exist and the recursion starts from its first step out of zero,
/// `Syy − Syx Sxx⁻¹ Sxy`; detectability through `Axy` still lets it converge.
pub fn solve_dare(ayy: &Mat, axy: &Mat, syy: &Mat, syx: &Mat, sxx: &Mat) -> Result<DareSolution> {
    let m = check_square(ayy, "Ayy")?;
    let nx = check_square(sxx, "Sxx")?;
    if axy.shape() != (nx, m) || syy.shape() != (m, m) || syx.shape() != (m, nx) {
        return Err(Error::DimensionMismatch(format!(
            "DARE blocks: Ayy {m}x{m}, Axy {:?}, Syy {:?}, Syx {:?}, Sxx {nx}x{nx}",
            axy.shape(),
            syy.shape(),
            syx.shape()
        )));
    }
    let sxx_inv = inverse_pd(sxx)?;
    let q0 = symmetrize(&(syy - syx * &sxx_inv * syx.transpose()));
    let mut p = if spectral_radius(ayy)? < 1.0 - STABILITY_EPS {
        solve_dlyap(ayy, &q0)?
    } else {
        q0
    };
    let syy = symmetrize(syy);

    let step = |p: &Mat, iteration: usize| -> Result<(Mat, Mat, Mat)> {
        let sigma_r = symmetrize(&(axy * p * axy.transpose() + sxx));
        let chol = sigma_r
            .clone()
            .cholesky()
            .ok_or(Error::SingularInnovations { iteration })?;
        let g = ayy * p * axy.transpose() + syx;
        let gain = chol.solve(&g.transpose()).transpose();
        Ok((sigma_r, g, gain))
    };

    for iteration in 0..DARE_MAX_ITER {
        let (_, g, gain) = step(&p, iteration)?;
        let next = symmetrize(&(ayy * &p * ayy.transpose() + &syy - &gain * g.transpose()));
        let delta = inf_norm(&(&next - &p));
        let scale = inf_norm(&next);
        if !scale.is_finite() {
            return Err(Error::NonConvergent("DARE iteration diverged".into()));
        }
        p = next;
        if delta <= DARE_STEP_TOL * scale.max(f64::MIN_POSITIVE) {
            let (sigma_r, _, gain) = step(&p, iteration + 1)?;
            return Ok(DareSolution {
                p,
                sigma_r,
                gain,
                iterations: iteration + 1,
            });
        }
    }
    Err(Error::NonConvergent(format!(
        "DARE fixed point not reached in {DARE_MAX_ITER} iterations"
    )))
}
