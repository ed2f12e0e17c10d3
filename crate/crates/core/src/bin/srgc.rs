use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use srgc::bivar::{self, Bivar1Params};
use srgc::gc::{gc_band, gc_spectral, gc_time_lr, gc_time_sr, FrequencyBand};
use srgc::inference::{error_rate_experiment, lr_test, projection_test, ExperimentConfig, OrderPolicy, Statistic};
use srgc::null_dist::{gamma_approx, genchi2_moments, genchi2_quantile, null_weights_band, null_weights_time};
use srgc::rng::Seed;
use srgc::sampling::{default_burn_in, fit_var_ols, project_to_null, read_series_csv, simulate, write_series_csv, OrderCriterion};
use srgc::var_model::{
    log_generalised_correlation, random_var, read_model_file, GenMode, ModelFile, Partition, VarParams,
};
use srgc::{Error, Result};

#[derive(Parser)]
#[command(name = "srgc", version, about = "Single-regression Granger causality toolkit")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate or inspect a VAR model file.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
    },
    /// Simulate a series from a model file (CSV output).
    Simulate {
        model: PathBuf,
        #[arg(short = 'N', long = "length")]
        length: usize,
        /// Defaults to the mixing-time heuristic.
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Granger causality of a model, or of an OLS fit to data.
    Gc {
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fit order for --data.
        #[arg(short = 'p', requires = "data")]
        order: Option<usize>,
        /// Size of the target block x (the first variables).
        #[arg(long)]
        partition: Option<usize>,
        /// Also report the dual-regression (LR) estimate for --data.
        #[arg(long, requires = "data")]
        lr: bool,
        #[command(flatten)]
        band: BandArgs,
        /// Spectral GC at this many equispaced frequencies on [0, 2pi).
        #[arg(long, conflicts_with = "band")]
        spectrum: Option<usize>,
    },
    /// Asymptotic null law of N * F at a null model.
    Nulldist {
        model: PathBuf,
        #[arg(long)]
        partition: Option<usize>,
        #[command(flatten)]
        band: BandArgs,
    },
    /// Projection or likelihood-ratio test on a data file.
    Test {
        data: PathBuf,
        #[arg(long)]
        partition: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, conflicts_with = "select", required_unless_present = "select")]
        order: Option<usize>,
        #[arg(long, requires = "pmax")]
        select: Option<OrderCriterion>,
        #[arg(long)]
        pmax: Option<usize>,
        #[arg(long, value_enum, default_value_t = Method::Projection)]
        method: Method,
        #[command(flatten)]
        band: BandArgs,
    },
    /// Error-rate sweep from a JSON config.
    Experiment {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Bivariate VAR(1) closed forms next to the general pipeline.
    Oracle {
        #[command(flatten)]
        params: OracleParams,
        #[arg(long)]
        omega: Option<f64>,
        #[command(flatten)]
        band: BandArgs,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    Random {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(short = 'p')]
        p: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, conflicts_with = "gc", required_unless_present = "gc")]
        null: bool,
        /// Target population GC.
        #[arg(long)]
        gc: Option<f64>,
    },
    Info {
        model: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Projection,
    Lr,
}

#[derive(Args)]
struct BandArgs {
    /// Frequency band, radians in [0, 2pi] unless --hz.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    band: Option<Vec<f64>>,
    /// Read --band in Hz.
    #[arg(long, requires = "fs")]
    hz: bool,
    /// Sampling rate for --hz.
    #[arg(long)]
    fs: Option<f64>,
}

impl BandArgs {
    fn resolve(&self) -> Result<Option<FrequencyBand>> {
        let Some(b) = &self.band else { return Ok(None) };
        if self.hz {
            FrequencyBand::from_hz(b[0], b[1], self.fs.expect("clap requires --fs")).map(Some)
        } else {
            FrequencyBand::new(b[0], b[1]).map(Some)
        }
    }
}

#[derive(Args)]
struct OracleParams {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_xx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_xy: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_yx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_yy: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_xx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma_xy: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_yy: f64,
}

struct Output<'a> {
    path: Option<&'a Path>,
}

impl Output<'_> {
    fn text(&self, s: &str) -> Result<()> {
        match self.path {
            Some(p) => fs::write(p, s)?,
            None => io::stdout().lock().write_all(s.as_bytes())?,
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.text(&s)
    }

    fn csv(&self, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.text(&String::from_utf8(bytes).expect("ascii csv"))
    }
}

fn load_model(path: &Path, nx: Option<usize>) -> Result<(VarParams, Partition)> {
    let (model, part) = read_model_file(path)?;
    match nx {
        Some(nx) => Ok((model.clone(), Partition::split(model.n(), nx)?)),
        None => Ok((model, part)),
    }
}

fn cmd_model(cli: &Cli, cmd: &ModelCmd, out: &Output) -> Result<()> {
    match cmd {
        ModelCmd::Random { nx, ny, p, rho, gamma, null, gc } => {
            let part = Partition::new(*nx, *ny)?;
            let mode = match (null, gc) {
                (true, _) => GenMode::Null,
                (false, Some(f)) => GenMode::TargetGc(*f),
                (false, None) => unreachable!("clap requires --null or --gc"),
            };
            let model = random_var(*p, &part, *rho, *gamma, mode, &mut Seed(cli.seed).rng())?;
            out.json(&ModelFile::from_model(&model, part))
        }
        ModelCmd::Info { model } => {
            let (model, part) = load_model(model, None)?;
            let gc = gc_time_sr(&model, &part)?;
            let null = if model.is_null(&part) {
                Some(model.clone())
            } else {
                project_to_null(&model, &part).ok()
            };
            let weights = null.and_then(|m| null_weights_time(&m, &part).ok()).map(|law| {
                let w = law.weights();
                json!({
                    "count": w.len(),
                    "multiplicity": law.multiplicity(),
                    "max": w[0],
                    "min": w[w.len() - 1],
                    "sum": w.iter().sum::<f64>(),
                })
            });
            out.json(&json!({
                "n": model.n(),
                "p": model.p(),
                "partition": part,
                "spectral_radius": model.spectral_radius(),
                "log_generalised_correlation": log_generalised_correlation(model.sigma())?,
                "is_null": model.is_null(&part),
                "gc": gc.value,
                "null_weights": weights,
            }))
        }
    }
}

fn cmd_gc(cmd: &Cmd, out: &Output, format: Format) -> Result<()> {
    let Cmd::Gc { model, data, order, partition, lr, band, spectrum } = cmd else { unreachable!() };
    let band = band.resolve()?;
    let (fit, part, series) = match (model, data) {
        (Some(m), _) => {
            let (m, part) = load_model(m, *partition)?;
            (m, part, None)
        }
        (None, Some(d)) => {
            let series = read_series_csv(d)?;
            let p = order.ok_or_else(|| Error::InvalidArgument("-p is required with --data".into()))?;
            let nx = partition.ok_or_else(|| Error::InvalidArgument("--partition is required with --data".into()))?;
            let part = Partition::split(series.n(), nx)?;
            (fit_var_ols(&series, p)?, part, Some((series, p)))
        }
        (None, None) => unreachable!("clap requires --model or --data"),
    };
    if let Some(n) = *spectrum {
        if n == 0 {
            return Err(Error::InvalidArgument("--spectrum needs at least one point".into()));
        }
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let w = 2.0 * PI * k as f64 / n as f64;
            rows.push(vec![w, gc_spectral(&fit, &part, w)?.value]);
        }
        return match format {
            Format::Csv => out.csv(&["omega", "gc"], &rows),
            Format::Json => out.json(&rows.iter().map(|r| json!({"omega": r[0], "gc": r[1]})).collect::<Vec<_>>()),
        };
    }
    let value = match band {
        Some(b) => gc_band(&fit, &part, &b)?,
        None => gc_time_sr(&fit, &part)?,
    };
    let lr_value = match (&series, lr) {
        (Some((s, p)), true) => Some(gc_time_lr(s, *p, &part)?),
        _ => None,
    };
    match format {
        Format::Csv => {
            let mut rows = vec![vec![value.value]];
            if let Some(l) = &lr_value {
                rows[0].push(l.value);
                out.csv(&["gc", "gc_lr"], &rows)
            } else {
                out.csv(&["gc"], &rows)
            }
        }
        Format::Json => match lr_value {
            Some(l) => out.json(&json!({"single_regression": value, "likelihood_ratio": l})),
            None => out.json(&value),
        },
    }
}

fn cmd_nulldist(model: &Path, partition: Option<usize>, band: &BandArgs, out: &Output, format: Format) -> Result<()> {
    let (model, part) = load_model(model, partition)?;
    let law = match band.resolve()? {
        Some(b) => null_weights_band(&model, &part, &b)?,
        None => null_weights_time(&model, &part)?,
    };
    let gamma = gamma_approx(&law)?;
    let (mean, var) = genchi2_moments(&law);
    let mut quantiles = Vec::new();
    for q in [0.9, 0.95, 0.99] {
        quantiles.push(vec![q, genchi2_quantile(&law, q)?, gamma.quantile(q)]);
    }
    match format {
        Format::Csv => out.csv(&["level", "quantile", "gamma_quantile"], &quantiles),
        Format::Json => out.json(&json!({
            "law": law,
            "mean": mean,
            "variance": var,
            "gamma_approx": gamma,
            "quantiles": quantiles
                .iter()
                .map(|r| json!({"level": r[0], "value": r[1], "gamma_value": r[2]}))
                .collect::<Vec<_>>(),
        })),
    }
}

fn cmd_oracle(params: &OracleParams, omega: Option<f64>, band: &BandArgs, out: &Output) -> Result<()> {
    let b = Bivar1Params {
        a_xx: params.a_xx,
        a_xy: params.a_xy,
        a_yx: params.a_yx,
        a_yy: params.a_yy,
        sigma_xx: params.sigma_xx,
        sigma_xy: params.sigma_xy,
        sigma_yy: params.sigma_yy,
    };
    let (model, part) = b.to_model()?;
    let pair = |oracle: f64, pipeline: f64| json!({"oracle": oracle, "pipeline": pipeline, "diff": (oracle - pipeline).abs()});
    let mut rep = serde_json::Map::new();
    rep.insert("params".into(), serde_json::to_value(b)?);
    rep.insert("derived".into(), serde_json::to_value(b.derived())?);
    rep.insert("gc_time".into(), pair(bivar::bivar_gc_time(&b), gc_time_sr(&model, &part)?.value));
    if let Some(w) = omega {
        rep.insert("gc_spectral".into(), pair(bivar::bivar_gc_spectral(&b, w), gc_spectral(&model, &part, w)?.value));
    }
    let band = band.resolve()?;
    if let Some(f) = &band {
        rep.insert("gc_band".into(), pair(bivar::bivar_gc_band(&b, f), gc_band(&model, &part, f)?.value));
    }
    if b.is_null() {
        let law = null_weights_time(&model, &part)?;
        rep.insert("null_lambda".into(), pair(bivar::bivar_null_lambda(&b)?, law.weights()[0]));
        if let Some(w) = omega {
            rep.insert("null_lambda_spectral".into(), json!(bivar::bivar_null_lambda_spectral(&b, w)?));
        }
        if let Some(f) = &band {
            let law = null_weights_band(&model, &part, f)?;
            rep.insert("null_lambda_band".into(), pair(bivar::bivar_null_lambda_band(&b, f)?, law.weights()[0]));
        }
    }
    out.json(&rep)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run(cli: &Cli) -> Result<()> {
    let out = Output { path: cli.out.as_deref() };
    match &cli.cmd {
        Cmd::Model { cmd } => cmd_model(cli, cmd, &out),
        Cmd::Simulate { model, length, burn_in } => {
            let (model, _) = load_model(model, None)?;
            let burn = burn_in.unwrap_or_else(|| default_burn_in(model.p(), model.spectral_radius()));
            let series = simulate(&model, *length, burn, &mut Seed(cli.seed).rng())?;
            let mut buf = Vec::new();
            write_series_csv(&mut buf, &series)?;
            out.text(&String::from_utf8(buf).expect("ascii csv"))
        }
        cmd @ Cmd::Gc { .. } => cmd_gc(cmd, &out, cli.format),
        Cmd::Nulldist { model, partition, band } => cmd_nulldist(model, *partition, band, &out, cli.format),
        Cmd::Test { data, partition, alpha, order, select, pmax, method, band } => {
            let series = read_series_csv(data)?;
            let part = Partition::split(series.n(), *partition)?;
            let policy = match (order, select) {
                (Some(p), _) => OrderPolicy::Fixed(*p),
                (None, Some(c)) => OrderPolicy::Select { criterion: *c, p_max: pmax.expect("clap requires --pmax") },
                (None, None) => unreachable!("clap requires --order or --select"),
            };
            let r = match method {
                Method::Projection => {
                    let stat = band.resolve()?.map(Statistic::Band).unwrap_or(Statistic::Time);
                    projection_test(&series, &part, *alpha, &policy, &stat)?
                }
                Method::Lr => {
                    if band.band.is_some() {
                        return Err(Error::InvalidArgument("the LR test has no band-limited form".into()));
                    }
                    lr_test(&series, &part, *alpha, &policy)?
                }
            };
            out.json(&r)
        }
        Cmd::Experiment { config, workers } => {
            let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(config)?)?;
            let report = error_rate_experiment(&cfg, Seed(cli.seed), *workers)?;
            if cli.format == Format::Csv {
                let mut buf = Vec::new();
                report.write_summary_csv(&mut buf)?;
                return out.text(&String::from_utf8(buf).expect("ascii csv"));
            }
            out.json(&report)?;
            if let Some(p) = &cli.out {
                report.write_model_csv(fs::File::create(sidecar(p, "models"))?)?;
                report.write_summary_csv(fs::File::create(sidecar(p, "summary"))?)?;
            }
            Ok(())
        }
        Cmd::Oracle { params, omega, band } => cmd_oracle(params, *omega, band, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
