//! Simulation from a VAR model, OLS fitting, order selection and
//! projection onto the null space.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::var_model::{check_partition, Partition, VarParams};

/// A sample `u_1..u_N`; row `t` of `values` is `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Mat,
}

impl TimeSeries {
    pub fn new(values: Mat) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty time series".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("time series contains non-finite values".into()));
        }
        Ok(TimeSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    /// The listed columns, in order, as a new series.
    pub fn columns(&self, cols: &[usize]) -> Result<TimeSeries> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n()) {
            return Err(Error::DimensionMismatch(format!("column {c} out of range")));
        }
        TimeSeries::new(self.values.select_columns(cols))
    }
}

/// Burn-in heuristic: `⌈10p / (1 − ρ)⌉`, at least 100.
pub fn default_burn_in(p: usize, rho: f64) -> usize {
    let b = (10.0 * p as f64 / (1.0 - rho)).ceil();
    if b.is_finite() {
        (b as usize).max(100)
    } else {
        100
    }
}

/// Draws `N` observations after discarding `burn_in`, starting from zero.
pub fn simulate<R: Rng + ?Sized>(
    model: &VarParams,
    len: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<TimeSeries> {
    if len == 0 {
        return Err(Error::InvalidArgument("series length must be >= 1".into()));
    }
    let (n, p) = (model.n(), model.p());
    let l = linalg::cholesky_right(model.sigma())?.transpose();
    let total = len + burn_in;
    // Row-major history with p leading zero rows as the initial state.
    let mut u = vec![0.0; (total + p) * n];
    let mut z = vec![0.0; n];
    let a = model.a();
    for t in p..total + p {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            for k in 1..=p {
                let prev = &u[(t - k) * n..(t - k + 1) * n];
                let off = (k - 1) * n;
                for (j, &v) in prev.iter().enumerate() {
                    acc += a[(i, off + j)] * v;
                }
            }
            u[t * n + i] = acc;
        }
    }
    let start = (p + burn_in) * n;
    TimeSeries::new(Mat::from_row_slice(len, n, &u[start..]))
}

/// Fits `u_t = Σ_k A_k u_{t−k} + ε_t` by least squares on demeaned data,
/// conditioning on the first `p` observations. `Σ̂ = EᵀE / (N − p)`.
///
/// The estimate is not required to be stable.
pub fn fit_var_ols(data: &TimeSeries, p: usize) -> Result<VarParams> {
    let (len, n) = (data.len(), data.n());
    if p == 0 {
        return Err(Error::DimensionMismatch("model order p must be >= 1".into()));
    }
    if len <= p * n + p {
        return Err(Error::InvalidArgument(format!(
            "need N > pn + p = {} observations, got {len}",
            p * n + p
        )));
    }
    let mean = data.values.row_mean();
    let u = Mat::from_fn(len, n, |t, j| data.values[(t, j)] - mean[j]);
    let rows = len - p;
    let x = Mat::from_fn(rows, p * n, |t, c| {
        let (k, j) = (c / n + 1, c % n);
        u[(t + p - k, j)]
    });
    let y = u.rows(p, rows).into_owned();
    let xt = x.transpose();
    let gram = &xt * &x;
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let b = chol.solve(&(&xt * &y));
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let e = y - &x * &b;
    let sigma = linalg::symmetrize(&(e.transpose() * &e / rows as f64));
    VarParams::from_parts(b.transpose(), sigma)
}

/// Information criterion for order selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderCriterion {
    Bic,
    Hqic,
    Aic,
}

impl FromStr for OrderCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(OrderCriterion::Bic),
            "hqic" | "hq" => Ok(OrderCriterion::Hqic),
            "aic" => Ok(OrderCriterion::Aic),
            _ => Err(Error::InvalidArgument(format!("unknown order criterion {s:?}"))),
        }
    }
}

impl fmt::Display for OrderCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderCriterion::Bic => "bic",
            OrderCriterion::Hqic => "hqic",
            OrderCriterion::Aic => "aic",
        })
    }
}

impl OrderCriterion {
    /// Penalty for `k` free coefficients on `t` effective observations.
    fn penalty(self, k: f64, t: f64) -> f64 {
        match self {
            OrderCriterion::Bic => k * t.ln(),
            OrderCriterion::Hqic => 2.0 * k * t.ln().ln(),
            OrderCriterion::Aic => 2.0 * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSelection {
    pub order: usize,
    /// `scores[p − 1]` is the criterion value at order `p`.
    pub scores: Vec<f64>,
}

/// Minimises `log|Σ̂(p)| + penalty(p·n², N−p) / (N−p)` over `1..=p_max`;
/// ties go to the smaller order.
pub fn select_order(data: &TimeSeries, p_max: usize, criterion: OrderCriterion) -> Result<OrderSelection> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be >= 1".into()));
    }
    let n = data.n();
    let mut scores = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let fit = fit_var_ols(data, p)?;
        let t = (data.len() - p) as f64;
        let ld = linalg::log_det_pd(fit.sigma()).map_err(|_| Error::RankDeficient)?;
        scores.push(ld + criterion.penalty((p * n * n) as f64, t) / t);
    }
    let mut order = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[order - 1] {
            order = i + 1;
        }
    }
    Ok(OrderSelection { order, scores })
}

/// Zeroes every `A_k[x, y]` block, leaving all other entries untouched.
pub fn project_to_null(estimate: &VarParams, part: &Partition) -> Result<VarParams> {
    check_partition(estimate, part)?;
    let n = estimate.n();
    let mut a = estimate.a().clone();
    for k in 0..estimate.p() {
        for i in part.x() {
            for j in part.y() {
                a[(i, k * n + j)] = 0.0;
            }
        }
    }
    VarParams::from_parts(a, estimate.sigma().clone())
}

/// Reads a CSV series, one row per time step; a non-numeric first row is
/// taken as a header.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::InvalidArgument(format!("row {}: {e}", i + 1)));
            }
        };
        match ncols {
            None => ncols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} columns, expected {c}",
                    i + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        data.extend(row);
    }
    let n = ncols.ok_or_else(|| Error::InvalidArgument("no data rows".into()))?;
    TimeSeries::new(Mat::from_row_slice(data.len() / n, n, &data))
}

/// Writes a CSV series with a `u1..un` header and 17 significant digits.
pub fn write_series_csv<W: std::io::Write>(out: W, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=series.n()).map(|j| format!("u{j}")))?;
    for row in series.values.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}
