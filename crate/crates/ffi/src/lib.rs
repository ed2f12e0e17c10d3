//! C ABI over `srgc`.
//!
//! Every function returns an [`SrgcStatus`]; results come back through out
//! pointers. Models, series and null laws are opaque handles owned by the
//! caller and released with the matching `*_free`. After a failure,
//! [`srgc_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use srgc::gc::{gc_band, gc_spectral, gc_time_sr, FrequencyBand};
use srgc::inference::{lr_test, projection_test, OrderPolicy, Statistic, TestResult};
use srgc::linalg::Mat;
use srgc::null_dist::{genchi2_cdf, genchi2_quantile, null_weights_band, null_weights_time, GenChi2};
use srgc::rng::Seed;
use srgc::sampling::{default_burn_in, simulate, TimeSeries};
use srgc::var_model::{random_var, GenMode, ModelFile, Partition, VarParams};
use srgc::Error;

/// Pass as `burn_in` to use the mixing-time default.
pub const SRGC_DEFAULT_BURN_IN: i64 = -1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrgcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    InvalidModel = 5,
    NotNull = 6,
    NotPositiveDefinite = 7,
    RankDeficient = 8,
    Singular = 9,
    DegenerateLaw = 10,
    UnstableFit = 11,
    NonConvergent = 12,
    Unachievable = 13,
    AccuracyNotMet = 14,
    Io = 15,
    Parse = 16,
    BufferTooSmall = 17,
    Internal = 18,
    Panic = 19,
}

impl From<&Error> for SrgcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch(_) => SrgcStatus::DimensionMismatch,
            Error::NonConvergent(_) => SrgcStatus::NonConvergent,
            Error::SingularInnovations { .. } | Error::SingularPhi { .. } | Error::SingularSpectrum { .. } => {
                SrgcStatus::Singular
            }
            Error::NotPositiveDefinite(_) => SrgcStatus::NotPositiveDefinite,
            Error::RankDeficient => SrgcStatus::RankDeficient,
            Error::Unachievable(_) => SrgcStatus::Unachievable,
            Error::NotNull { .. } => SrgcStatus::NotNull,
            Error::DegenerateLaw => SrgcStatus::DegenerateLaw,
            Error::AccuracyNotMet { .. } => SrgcStatus::AccuracyNotMet,
            Error::UnstableFit { .. } => SrgcStatus::UnstableFit,
            Error::InvalidModel(_) => SrgcStatus::InvalidModel,
            Error::InvalidArgument(_) => SrgcStatus::InvalidArgument,
            Error::Internal(_) => SrgcStatus::Internal,
            Error::Io(_) => SrgcStatus::Io,
            Error::Json(_) | Error::Csv(_) => SrgcStatus::Parse,
        }
    }
}

/// A VAR model together with its `(x, y)` partition.
pub struct SrgcModel {
    model: VarParams,
    part: Partition,
}

/// A multivariate series, `len` rows by `n` columns.
pub struct SrgcSeries {
    series: TimeSeries,
}

/// A generalised χ² null law.
pub struct SrgcLaw {
    law: GenChi2,
}

/// Outcome of a test on a series.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrgcTestResult {
    /// Estimated GC in nats.
    pub statistic: f64,
    /// `N` times the statistic.
    pub scaled: f64,
    pub p_value: f64,
    pub critical: f64,
    pub reject: bool,
    pub fitted_order: usize,
}

impl From<&TestResult> for SrgcTestResult {
    fn from(r: &TestResult) -> Self {
        SrgcTestResult {
            statistic: r.statistic.value,
            scaled: r.scaled,
            p_value: r.p_value,
            critical: r.critical.unwrap_or(f64::NAN),
            reject: r.reject,
            fitted_order: r.fitted_order,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SrgcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SrgcStatus::from(&e), e.to_string())
    }
}

fn null_arg(name: &str) -> Failure {
    Failure(SrgcStatus::NullPointer, format!("{name} is null"))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrgcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SrgcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside srgc".into());
            SrgcStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller contract; null is checked here.
    unsafe { p.as_ref() }.ok_or_else(|| null_arg(name))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null_arg(name));
    }
    // SAFETY: non-null and, by contract, valid for writes.
    unsafe { out.write(v) };
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null_arg(name));
    }
    // SAFETY: caller passes a nul-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure(SrgcStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    // SAFETY: caller guarantees `len` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn fill(out: *mut f64, cap: usize, values: &[f64], name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null_arg(name));
    }
    if cap < values.len() {
        return Err(Failure(
            SrgcStatus::BufferTooSmall,
            format!("{name} holds {cap} values, {} needed", values.len()),
        ));
    }
    // SAFETY: `cap >= values.len()` writable doubles by contract.
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `srgc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn srgc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn srgc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from an `srgc_*` function that returns an owned string.
#[no_mangle]
pub unsafe extern "C" fn srgc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

// Models

/// Parses a model JSON document (`n`, `p`, `A`, `Sigma`, `partition`).
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_from_json(json: *const c_char, out: *mut *mut SrgcModel) -> SrgcStatus {
    guard(|| {
        let text = unsafe { c_str(json, "json") }?;
        let file: ModelFile = serde_json::from_str(text).map_err(Error::from)?;
        let (model, part) = file.into_model()?;
        unsafe { write_out(out, boxed(SrgcModel { model, part }), "out") }
    })
}

/// Builds a model from row-major `A` (`n × n·p`, lag blocks side by side)
/// and `Sigma` (`n × n`); the first `nx` variables form the target block.
///
/// # Safety
/// `a` must hold `n·n·p` doubles and `sigma` `n·n`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_new(
    n: usize,
    p: usize,
    a: *const f64,
    sigma: *const f64,
    nx: usize,
    out: *mut *mut SrgcModel,
) -> SrgcStatus {
    guard(|| {
        if n == 0 || p == 0 {
            return Err(Error::InvalidModel("n and p must be >= 1".into()).into());
        }
        let a = unsafe { slice(a, n * n * p, "a") }?;
        let sigma = unsafe { slice(sigma, n * n, "sigma") }?;
        let model = VarParams::new(Mat::from_row_slice(n, n * p, a), Mat::from_row_slice(n, n, sigma))?;
        let part = Partition::split(n, nx)?;
        unsafe { write_out(out, boxed(SrgcModel { model, part }), "out") }
    })
}

/// Random VAR(p) with spectral radius `rho` and residual log-generalised
/// correlation `gamma`. With `null` set there is no `y → x` causality;
/// otherwise the population GC equals `target_gc`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_random(
    nx: usize,
    ny: usize,
    p: usize,
    rho: f64,
    gamma: f64,
    null: bool,
    target_gc: f64,
    seed: u64,
    out: *mut *mut SrgcModel,
) -> SrgcStatus {
    guard(|| {
        let part = Partition::new(nx, ny)?;
        let mode = if null { GenMode::Null } else { GenMode::TargetGc(target_gc) };
        let model = random_var(p, &part, rho, gamma, mode, &mut Seed(seed).rng())?;
        unsafe { write_out(out, boxed(SrgcModel { model, part }), "out") }
    })
}

/// Serialises a model to JSON; free the string with [`srgc_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_to_json(model: *const SrgcModel, out: *mut *mut c_char) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let text = serde_json::to_string(&ModelFile::from_model(&m.model, m.part)).map_err(Error::from)?;
        let c = CString::new(text).map_err(|e| Failure(SrgcStatus::Internal, e.to_string()))?;
        unsafe { write_out(out, c.into_raw(), "out") }
    })
}

/// # Safety
/// `model` must be a live handle; each non-NULL out pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_dims(
    model: *const SrgcModel,
    n: *mut usize,
    p: *mut usize,
    nx: *mut usize,
) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        unsafe {
            write_out(n, m.model.n(), "n")?;
            write_out(p, m.model.p(), "p")?;
            write_out(nx, m.part.nx, "nx")
        }
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_spectral_radius(model: *const SrgcModel, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        unsafe { write_out(out, m.model.spectral_radius(), "out") }
    })
}

/// NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srgc_model_free(model: *mut SrgcModel) {
    if !model.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(model) });
    }
}

// Series

/// Copies a row-major `len × n` buffer into a series handle.
///
/// # Safety
/// `data` must hold `len·n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_series_new(
    data: *const f64,
    len: usize,
    n: usize,
    out: *mut *mut SrgcSeries,
) -> SrgcStatus {
    guard(|| {
        let values = unsafe { slice(data, len * n, "data") }?;
        let series = TimeSeries::new(Mat::from_row_slice(len, n, values))?;
        unsafe { write_out(out, boxed(SrgcSeries { series }), "out") }
    })
}

/// Simulates `len` observations after `burn_in` discarded steps
/// (any negative value, such as [`SRGC_DEFAULT_BURN_IN`], for the default).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_simulate(
    model: *const SrgcModel,
    len: usize,
    burn_in: i64,
    seed: u64,
    out: *mut *mut SrgcSeries,
) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let burn = usize::try_from(burn_in)
            .unwrap_or_else(|_| default_burn_in(m.model.p(), m.model.spectral_radius()));
        let series = simulate(&m.model, len, burn, &mut Seed(seed).rng())?;
        unsafe { write_out(out, boxed(SrgcSeries { series }), "out") }
    })
}

/// # Safety
/// `series` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_series_dims(series: *const SrgcSeries, len: *mut usize, n: *mut usize) -> SrgcStatus {
    guard(|| {
        let s = unsafe { as_ref(series, "series") }?;
        unsafe {
            write_out(len, s.series.len(), "len")?;
            write_out(n, s.series.n(), "n")
        }
    })
}

/// Copies the series, row-major, into `buf` of capacity `cap` doubles.
///
/// # Safety
/// `series` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn srgc_series_data(series: *const SrgcSeries, buf: *mut f64, cap: usize) -> SrgcStatus {
    guard(|| {
        let s = unsafe { as_ref(series, "series") }?;
        let v = s.series.values();
        let rows: Vec<f64> = (0..v.nrows()).flat_map(|i| (0..v.ncols()).map(move |j| v[(i, j)])).collect();
        unsafe { fill(buf, cap, &rows, "buf") }
    })
}

/// NULL is ignored.
///
/// # Safety
/// `series` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srgc_series_free(series: *mut SrgcSeries) {
    if !series.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(series) });
    }
}

// Granger causality

/// Population GC `y → x` in nats.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_gc_time(model: *const SrgcModel, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        unsafe { write_out(out, gc_time_sr(&m.model, &m.part)?.value, "out") }
    })
}

/// Spectral GC at angular frequency `omega` (radians).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_gc_spectral(model: *const SrgcModel, omega: f64, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        unsafe { write_out(out, gc_spectral(&m.model, &m.part, omega)?.value, "out") }
    })
}

/// Band-averaged spectral GC over `[lo, hi] ⊆ [0, 2π]`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_gc_band(model: *const SrgcModel, lo: f64, hi: f64, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let band = FrequencyBand::new(lo, hi)?;
        unsafe { write_out(out, gc_band(&m.model, &m.part, &band)?.value, "out") }
    })
}

// Null laws

/// Time-domain null law at a null model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_null_law_time(model: *const SrgcModel, out: *mut *mut SrgcLaw) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let law = null_weights_time(&m.model, &m.part)?;
        unsafe { write_out(out, boxed(SrgcLaw { law }), "out") }
    })
}

/// Band-limited null law at a null model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_null_law_band(
    model: *const SrgcModel,
    lo: f64,
    hi: f64,
    out: *mut *mut SrgcLaw,
) -> SrgcStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let band = FrequencyBand::new(lo, hi)?;
        let law = null_weights_band(&m.model, &m.part, &band)?;
        unsafe { write_out(out, boxed(SrgcLaw { law }), "out") }
    })
}

/// Law from explicit weights, each carrying `multiplicity` degrees of freedom.
///
/// # Safety
/// `weights` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_new(
    weights: *const f64,
    len: usize,
    multiplicity: usize,
    out: *mut *mut SrgcLaw,
) -> SrgcStatus {
    guard(|| {
        let w = unsafe { slice(weights, len, "weights") }?;
        let law = GenChi2::new(w.to_vec(), multiplicity, srgc::null_dist::LawKind::Time, None)?;
        unsafe { write_out(out, boxed(SrgcLaw { law }), "out") }
    })
}

/// Number of distinct weights and their multiplicity.
///
/// # Safety
/// `law` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_dims(law: *const SrgcLaw, len: *mut usize, multiplicity: *mut usize) -> SrgcStatus {
    guard(|| {
        let l = unsafe { as_ref(law, "law") }?;
        unsafe {
            write_out(len, l.law.weights().len(), "len")?;
            write_out(multiplicity, l.law.multiplicity(), "multiplicity")
        }
    })
}

/// Copies the weights, descending, into `buf` of capacity `cap`.
///
/// # Safety
/// `law` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_weights(law: *const SrgcLaw, buf: *mut f64, cap: usize) -> SrgcStatus {
    guard(|| {
        let l = unsafe { as_ref(law, "law") }?;
        unsafe { fill(buf, cap, l.law.weights(), "buf") }
    })
}

/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_cdf(law: *const SrgcLaw, x: f64, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let l = unsafe { as_ref(law, "law") }?;
        unsafe { write_out(out, genchi2_cdf(&l.law, x)?, "out") }
    })
}

/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_quantile(law: *const SrgcLaw, q: f64, out: *mut f64) -> SrgcStatus {
    guard(|| {
        let l = unsafe { as_ref(law, "law") }?;
        unsafe { write_out(out, genchi2_quantile(&l.law, q)?, "out") }
    })
}

/// NULL is ignored.
///
/// # Safety
/// `law` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srgc_law_free(law: *mut SrgcLaw) {
    if !law.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(law) });
    }
}

// Tests

/// Projection test at fixed order `p` on the time-domain statistic; the
/// first `nx` columns are the target block.
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_projection_test(
    series: *const SrgcSeries,
    nx: usize,
    p: usize,
    alpha: f64,
    out: *mut SrgcTestResult,
) -> SrgcStatus {
    guard(|| {
        let s = unsafe { as_ref(series, "series") }?;
        let part = Partition::split(s.series.n(), nx)?;
        let r = projection_test(&s.series, &part, alpha, &OrderPolicy::Fixed(p), &Statistic::Time)?;
        unsafe { write_out(out, SrgcTestResult::from(&r), "out") }
    })
}

/// Likelihood-ratio test against χ²(p·nx·ny).
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srgc_lr_test(
    series: *const SrgcSeries,
    nx: usize,
    p: usize,
    alpha: f64,
    out: *mut SrgcTestResult,
) -> SrgcStatus {
    guard(|| {
        let s = unsafe { as_ref(series, "series") }?;
        let part = Partition::split(s.series.n(), nx)?;
        let r = lr_test(&s.series, &part, alpha, &OrderPolicy::Fixed(p))?;
        unsafe { write_out(out, SrgcTestResult::from(&r), "out") }
    })
}
