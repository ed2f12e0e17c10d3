#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use srgc::bivar::Bivar1Params;
use srgc::gc::FrequencyBand;
use srgc::linalg::Mat;
use srgc::rng::SimRng;
use srgc::var_model::{random_var, GenMode, Partition, VarParams};

/// A valid bivariate VAR(1) with coefficients in (−0.9, 0.9) and residual
/// correlation in (−0.95, 0.95).
pub fn random_bivar(rng: &mut SimRng, null: bool) -> Bivar1Params {
    loop {
        let mut u = || rng.random_range(-0.9..0.9);
        let b = Bivar1Params {
            a_xx: u(),
            a_xy: if null { 0.0 } else { u() },
            a_yx: u(),
            a_yy: u(),
            sigma_xx: 0.0,
            sigma_xy: 0.0,
            sigma_yy: 0.0,
        };
        let (sx, sy) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let kappa: f64 = rng.random_range(-0.95..0.95);
        let b = Bivar1Params { sigma_xx: sx, sigma_yy: sy, sigma_xy: kappa * (sx * sy).sqrt(), ..b };
        if b.validate().is_ok() {
            return b;
        }
    }
}

pub fn random_band(rng: &mut SimRng) -> FrequencyBand {
    let a = rng.random_range(0.0..2.0 * PI);
    let b = rng.random_range(0.0..2.0 * PI);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    FrequencyBand::new(lo, hi.max(lo + 1e-3).min(2.0 * PI)).unwrap()
}

/// Random dimensions, order and radius; null or with a small target GC.
pub fn random_model(rng: &mut SimRng, null: bool) -> (VarParams, Partition) {
    loop {
        let nx = rng.random_range(1..=3);
        let ny = rng.random_range(1..=3);
        let p = rng.random_range(1..=4);
        let rho = rng.random_range(0.3..0.95);
        let gamma = rng.random_range(0.0..1.5);
        let part = Partition::new(nx, ny).unwrap();
        let mode = if null { GenMode::Null } else { GenMode::TargetGc(rng.random_range(0.001..0.2)) };
        if let Ok(m) = random_var(p, &part, rho, gamma, mode, rng) {
            return (m, part);
        }
    }
}

/// The `y` companion block and padded `Σ_{yy|x}` of the reduced problem.
pub fn reduced_null_lyapunov(model: &VarParams, part: &Partition, syy_x: &Mat) -> (Mat, Mat) {
    let (n, p, ny) = (model.n(), model.p(), part.ny);
    let m = p * ny;
    let mut ayy = Mat::zeros(m, m);
    for k in 0..p {
        for (ii, i) in part.y().enumerate() {
            for (jj, j) in part.y().enumerate() {
                ayy[(ii, k * ny + jj)] = model.a()[(i, k * n + j)];
            }
        }
    }
    for r in ny..m {
        ayy[(r, r - ny)] = 1.0;
    }
    let mut q = Mat::zeros(m, m);
    q.view_mut((0, 0), (ny, ny)).copy_from(syy_x);
    (ayy, q)
}
