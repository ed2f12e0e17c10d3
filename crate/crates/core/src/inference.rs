//! The projection test, the likelihood-ratio (Wilks) baseline, and a
//! reproducible Monte Carlo harness for Type I / Type II error rates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bivar::{grid_model, Bivar1Params};
use crate::error::{Error, Result};
use crate::gc::{gc_band, gc_time_lr, gc_time_sr, FrequencyBand, GcValue};
use crate::null_dist::{
    genchi2_cdf_detailed, genchi2_quantile, null_weights_band, null_weights_time, CdfMethod, GenChi2,
};
use crate::rng::Seed;
use crate::sampling::{default_burn_in, fit_var_ols, project_to_null, select_order, simulate, OrderCriterion, TimeSeries};
use crate::stats::quantile_sorted;
use crate::var_model::{random_var, GenMode, Partition, VarParams};

/// Model order used for the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    Fixed(usize),
    Select { criterion: OrderCriterion, p_max: usize },
}

impl OrderPolicy {
    fn resolve(&self, data: &TimeSeries) -> Result<usize> {
        match *self {
            OrderPolicy::Fixed(p) => Ok(p),
            OrderPolicy::Select { criterion, p_max } => Ok(select_order(data, p_max, criterion)?.order),
        }
    }
}

/// Which single-regression statistic the projection test uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    #[default]
    Time,
    Band(FrequencyBand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Projection,
    Lr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestLaw {
    GeneralizedChiSquared(GenChi2),
    ChiSquared { dof: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: GcValue,
    /// `N · F̂` with `N` the full sample length.
    pub scaled: f64,
    pub p_value: f64,
    /// Critical value of `scaled` at level `alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
    pub law: TestLaw,
    pub fitted_order: usize,
    /// Set when the p-value came from the Monte Carlo fallback.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value_std_error: Option<f64>,
}

fn check_inputs(data: &TimeSeries, part: &Partition, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if data.n() != part.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} variables but the data has {}",
            part.n(),
            data.n()
        )));
    }
    Ok(())
}

fn check_stable(m: &VarParams) -> Result<()> {
    let radius = m.spectral_radius();
    if !(radius < 1.0 - crate::linalg::STABILITY_EPS) {
        return Err(Error::UnstableFit { radius });
    }
    Ok(())
}

/// Fit, estimate `F̂`, project the fit onto the null, and compare `N·F̂`
/// with the null law at the projected parameters.
pub fn projection_test(
    data: &TimeSeries,
    part: &Partition,
    alpha: f64,
    order: &OrderPolicy,
    stat: &Statistic,
) -> Result<TestResult> {
    projection_test_impl(data, part, alpha, order, stat, true)
}

fn projection_test_impl(
    data: &TimeSeries,
    part: &Partition,
    alpha: f64,
    order: &OrderPolicy,
    stat: &Statistic,
    with_critical: bool,
) -> Result<TestResult> {
    check_inputs(data, part, alpha)?;
    let p = order.resolve(data)?;
    let fit = fit_var_ols(data, p)?;
    check_stable(&fit)?;
    fit.check_sigma().map_err(|_| Error::RankDeficient)?;
    let statistic = match stat {
        Statistic::Time => gc_time_sr(&fit, part)?,
        Statistic::Band(b) => gc_band(&fit, part, b)?,
    };
    let null = project_to_null(&fit, part)?;
    check_stable(&null)?;
    let law = match stat {
        Statistic::Time => null_weights_time(&null, part)?,
        Statistic::Band(b) => null_weights_band(&null, part, b)?,
    };
    let scaled = data.len() as f64 * statistic.value;
    let cdf = genchi2_cdf_detailed(&law, scaled, Seed(scaled.to_bits()))?;
    let p_value = (1.0 - cdf.value).clamp(0.0, 1.0);
    let critical = if with_critical {
        Some(genchi2_quantile(&law, 1.0 - alpha)?)
    } else {
        None
    };
    Ok(TestResult {
        method: TestMethod::Projection,
        statistic,
        scaled,
        p_value,
        critical,
        alpha,
        reject: p_value < alpha,
        law: TestLaw::GeneralizedChiSquared(law),
        fitted_order: p,
        p_value_std_error: (cdf.method == CdfMethod::MonteCarlo).then_some(cdf.error),
    })
}

/// `N·F̂_LR` against χ²(p·n_x·n_y).
pub fn lr_test(data: &TimeSeries, part: &Partition, alpha: f64, order: &OrderPolicy) -> Result<TestResult> {
    check_inputs(data, part, alpha)?;
    let p = order.resolve(data)?;
    let statistic = gc_time_lr(data, p, part)?;
    let scaled = data.len() as f64 * statistic.value;
    let dof = p * part.nx * part.ny;
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    let p_value = (1.0 - chi.cdf(scaled)).clamp(0.0, 1.0);
    Ok(TestResult {
        method: TestMethod::Lr,
        statistic,
        scaled,
        p_value,
        critical: Some(chi.inverse_cdf(1.0 - alpha)),
        alpha,
        reject: p_value < alpha,
        law: TestLaw::ChiSquared { dof },
        fitted_order: p,
        p_value_std_error: None,
    })
}


// Error-rate experiments

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Null,
    TargetGc(f64),
}

impl From<ModeSpec> for GenMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Null => GenMode::Null,
            ModeSpec::TargetGc(f) => GenMode::TargetGc(f),
        }
    }
}

/// Where the models of an experiment come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum ModelDesign {
    /// `models` random VAR(p) draws per sample length.
    RandomVar {
        nx: usize,
        ny: usize,
        p: usize,
        rho: f64,
        gamma: f64,
        mode: ModeSpec,
    },
    /// Bivariate VAR(1) on an `(a_xx, a_yy)` grid with `a_yx = 0`,
    /// `Σ = [[1, κ], [κ, 1]]` and `a_xy` set for population GC `target_gc`.
    BivarGrid {
        kappa: f64,
        target_gc: f64,
        a_values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub design: ModelDesign,
    pub n_list: Vec<usize>,
    /// Ignored by the grid design (one model per grid cell).
    #[serde(default = "default_models")]
    pub models: usize,
    pub trials_per_model: usize,
    pub alpha: f64,
    pub tests: Vec<TestMethod>,
    pub order_policy: OrderPolicy,
    #[serde(default)]
    pub statistic: Statistic,
    /// Defaults to the mixing-time heuristic.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Keep every scaled statistic `N·F̂` in the report.
    #[serde(default)]
    pub keep_statistics: bool,
}

fn default_models() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    TypeI,
    TypeII,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRate {
    pub model: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<(f64, f64)>,
    pub trials: usize,
    pub rejections: usize,
    /// Trials excluded because the fit or its projection was unstable.
    pub unstable: usize,
    /// Trials excluded for any other error.
    pub failed: usize,
    /// Error rate over valid trials: rejection rate for Type I, one minus
    /// it for Type II. NaN if no trial was valid.
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub test: TestMethod,
    pub n_obs: usize,
    pub error_kind: ErrorKind,
    pub per_model: Vec<ModelRate>,
    /// Mean of per-model rates.
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    /// Rate pooled over every valid trial.
    pub pooled: f64,
    pub valid_trials: usize,
    pub excluded_trials: usize,
    /// Exclusions exceed 1% of the attempted trials.
    pub exclusions_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFailure {
    pub n_obs: usize,
    pub model: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRateReport {
    pub config: ExperimentConfig,
    pub seed: Seed,
    pub cells: Vec<CellReport>,
    pub model_failures: Vec<ModelFailure>,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Decided { reject: bool, scaled: f64 },
    Unstable,
    Failed,
}

const MODEL_KEY: u64 = 1;
const TRIAL_KEY: u64 = 2;

struct DrawnModel {
    index: usize,
    model: VarParams,
    part: Partition,
    grid: Option<(f64, f64)>,
}

fn draw_models(cfg: &ExperimentConfig, ni: usize, seed: Seed) -> (Vec<DrawnModel>, Vec<ModelFailure>) {
    let n_obs = cfg.n_list[ni];
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    match &cfg.design {
        ModelDesign::RandomVar { nx, ny, p, rho, gamma, mode } => {
            let part = match Partition::new(*nx, *ny) {
                Ok(part) => part,
                Err(e) => {
                    bad.push(ModelFailure { n_obs, model: 0, error: e.to_string() });
                    return (ok, bad);
                }
            };
            for mi in 0..cfg.models {
                let mut rng = seed.derive(&[MODEL_KEY, ni as u64, mi as u64]).rng();
                match random_var(*p, &part, *rho, *gamma, (*mode).into(), &mut rng) {
                    Ok(model) => ok.push(DrawnModel { index: mi, model, part, grid: None }),
                    Err(e) => bad.push(ModelFailure { n_obs, model: mi, error: e.to_string() }),
                }
            }
        }
        ModelDesign::BivarGrid { kappa, target_gc, a_values } => {
            let mut mi = 0;
            for &a_xx in a_values {
                for &a_yy in a_values {
                    match grid_model(a_xx, a_yy, *kappa, *target_gc).and_then(|b: Bivar1Params| b.to_model()) {
                        Ok((model, part)) => ok.push(DrawnModel { index: mi, model, part, grid: Some((a_xx, a_yy)) }),
                        Err(e) => bad.push(ModelFailure { n_obs, model: mi, error: e.to_string() }),
                    }
                    mi += 1;
                }
            }
        }
    }
    (ok, bad)
}

fn run_trial(cfg: &ExperimentConfig, dm: &DrawnModel, n_obs: usize, seed: Seed) -> Vec<Outcome> {
    let burn = cfg
        .burn_in
        .unwrap_or_else(|| default_burn_in(dm.model.p(), dm.model.spectral_radius()));
    let data = match simulate(&dm.model, n_obs, burn, &mut seed.rng()) {
        Ok(d) => d,
        Err(_) => return vec![Outcome::Failed; cfg.tests.len()],
    };
    cfg.tests
        .iter()
        .map(|t| {
            let r = match t {
                TestMethod::Projection => {
                    projection_test_impl(&data, &dm.part, cfg.alpha, &cfg.order_policy, &cfg.statistic, false)
                }
                TestMethod::Lr => lr_test(&data, &dm.part, cfg.alpha, &cfg.order_policy),
            };
            match r {
                Ok(r) => Outcome::Decided { reject: r.reject, scaled: r.scaled },
                Err(Error::UnstableFit { .. }) => Outcome::Unstable,
                Err(e) => {
                    log::debug!("trial failed: {e}");
                    Outcome::Failed
                }
            }
        })
        .collect()
}

fn validate_config(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n_list.is_empty() || cfg.tests.is_empty() {
        return Err(Error::InvalidArgument("n_list and tests must be non-empty".into()));
    }
    if cfg.trials_per_model == 0 {
        return Err(Error::InvalidArgument("trials_per_model must be >= 1".into()));
    }
    if let ModelDesign::RandomVar { .. } = cfg.design {
        if cfg.models == 0 {
            return Err(Error::InvalidArgument("models must be >= 1".into()));
        }
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    Ok(())
}

/// Runs the sweep on a pool of `workers` threads. Every trial's stream is
/// derived from `(N index, model index, trial index)`, and results are
/// gathered in index order, so the report does not depend on `workers`.
pub fn error_rate_experiment(cfg: &ExperimentConfig, seed: Seed, workers: usize) -> Result<ErrorRateReport> {
    validate_config(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let kind = match &cfg.design {
        ModelDesign::RandomVar { mode: ModeSpec::Null, .. } => ErrorKind::TypeI,
        _ => ErrorKind::TypeII,
    };

    let mut cells = Vec::new();
    let mut model_failures = Vec::new();
    for (ni, &n_obs) in cfg.n_list.iter().enumerate() {
        let (models, failures) = draw_models(cfg, ni, seed);
        model_failures.extend(failures);
        let jobs: Vec<(usize, usize)> = (0..models.len())
            .flat_map(|m| (0..cfg.trials_per_model).map(move |t| (m, t)))
            .collect();
        let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(m, t)| {
                    let dm = &models[m];
                    let s = seed.derive(&[TRIAL_KEY, ni as u64, dm.index as u64, t as u64]);
                    run_trial(cfg, dm, n_obs, s)
                })
                .collect()
        });

        for (ti, &test) in cfg.tests.iter().enumerate() {
            let mut per_model = Vec::with_capacity(models.len());
            for (m, dm) in models.iter().enumerate() {
                let slice = &outcomes[m * cfg.trials_per_model..(m + 1) * cfg.trials_per_model];
                let (mut rej, mut valid, mut unstable, mut failed) = (0, 0, 0, 0);
                let mut stats = Vec::new();
                for o in slice {
                    match o[ti] {
                        Outcome::Decided { reject, scaled } => {
                            valid += 1;
                            rej += reject as usize;
                            stats.push(scaled);
                        }
                        Outcome::Unstable => unstable += 1,
                        Outcome::Failed => failed += 1,
                    }
                }
                let rr = if valid > 0 { rej as f64 / valid as f64 } else { f64::NAN };
                per_model.push(ModelRate {
                    model: dm.index,
                    grid: dm.grid,
                    trials: valid,
                    rejections: rej,
                    unstable,
                    failed,
                    rate: match kind {
                        ErrorKind::TypeI => rr,
                        ErrorKind::TypeII => 1.0 - rr,
                    },
                    statistics: cfg.keep_statistics.then_some(stats),
                });
            }
            cells.push(summarize(test, n_obs, kind, per_model));
        }
    }
    Ok(ErrorRateReport {
        config: cfg.clone(),
        seed,
        cells,
        model_failures,
    })
}

fn summarize(test: TestMethod, n_obs: usize, kind: ErrorKind, per_model: Vec<ModelRate>) -> CellReport {
    let mut rates: Vec<f64> = per_model.iter().map(|m| m.rate).filter(|r| r.is_finite()).collect();
    rates.sort_by(f64::total_cmp);
    let valid: usize = per_model.iter().map(|m| m.trials).sum();
    let rej: usize = per_model.iter().map(|m| m.rejections).sum();
    let excluded: usize = per_model.iter().map(|m| m.unstable + m.failed).sum();
    let pooled_rej = if valid > 0 { rej as f64 / valid as f64 } else { f64::NAN };
    let (mean, q025, q975) = if rates.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            rates.iter().sum::<f64>() / rates.len() as f64,
            quantile_sorted(&rates, 0.025),
            quantile_sorted(&rates, 0.975),
        )
    };
    CellReport {
        test,
        n_obs,
        error_kind: kind,
        per_model,
        mean,
        q025,
        q975,
        pooled: match kind {
            ErrorKind::TypeI => pooled_rej,
            ErrorKind::TypeII => 1.0 - pooled_rej,
        },
        valid_trials: valid,
        excluded_trials: excluded,
        exclusions_flagged: excluded as f64 > 0.01 * (valid + excluded) as f64,
    }
}

fn test_name(t: TestMethod) -> &'static str {
    match t {
        TestMethod::Projection => "projection",
        TestMethod::Lr => "lr",
    }
}

impl ErrorRateReport {
    /// One row per (test, N, model).
    pub fn write_model_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test", "n_obs", "model", "a_xx", "a_yy", "rate", "rejections", "trials", "unstable", "failed"])?;
        for c in &self.cells {
            for m in &c.per_model {
                let (gx, gy) = m
                    .grid
                    .map(|(x, y)| (format!("{x:.16e}"), format!("{y:.16e}")))
                    .unwrap_or_default();
                w.write_record([
                    test_name(c.test).to_string(),
                    c.n_obs.to_string(),
                    m.model.to_string(),
                    gx,
                    gy,
                    format!("{:.16e}", m.rate),
                    m.rejections.to_string(),
                    m.trials.to_string(),
                    m.unstable.to_string(),
                    m.failed.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (test, N).
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test", "n_obs", "error_kind", "mean", "q025", "q975", "pooled", "valid_trials", "excluded_trials", "flagged"])?;
        for c in &self.cells {
            w.write_record([
                test_name(c.test).to_string(),
                c.n_obs.to_string(),
                match c.error_kind {
                    ErrorKind::TypeI => "type_i",
                    ErrorKind::TypeII => "type_ii",
                }
                .to_string(),
                format!("{:.16e}", c.mean),
                format!("{:.16e}", c.q025),
                format!("{:.16e}", c.q975),
                format!("{:.16e}", c.pooled),
                c.valid_trials.to_string(),
                c.excluded_trials.to_string(),
                c.exclusions_flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
