//! C ABI over the `bansim` simulator.
//!
//! Configs and run results live behind opaque handles that the caller frees
//! with the matching `_free` function. Every fallible call returns a
//! [`BansimStatus`]; the message of the last failure on the calling thread
//! is available from [`bansim_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bansim::distfit::{self, Family, FitError, FitResult, ModelKind};
use bansim::metrics::Scheme;
use bansim::routing;
use bansim::run::{run_experiment, write_outputs, RunError, RunOptions, RunResults};
use bansim::scenario::{ConfigError, ScenarioConfig};
use bansim::sinr::{link_sinr, NoiseModel};
use libc::{c_char, size_t};

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BansimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    TraceError = 4,
    InvariantViolation = 5,
    FitError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BansimFamily {
    Lognormal = 0,
    InverseGaussian = 1,
    Burr = 2,
}

impl From<BansimFamily> for Family {
    fn from(f: BansimFamily) -> Self {
        match f {
            BansimFamily::Lognormal => Family::Lognormal,
            BansimFamily::InverseGaussian => Family::InverseGaussian,
            BansimFamily::Burr => Family::Burr,
        }
    }
}

impl From<Family> for BansimFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Lognormal => BansimFamily::Lognormal,
            Family::InverseGaussian => BansimFamily::InverseGaussian,
            Family::Burr => BansimFamily::Burr,
        }
    }
}

pub const BANSIM_SCHEME_SPR: u32 = 1;
pub const BANSIM_SCHEME_CMR: u32 = 2;

pub const BANSIM_FAMILY_MASK_LOGNORMAL: u32 = 1;
pub const BANSIM_FAMILY_MASK_INVERSE_GAUSSIAN: u32 = 2;
pub const BANSIM_FAMILY_MASK_BURR: u32 = 4;

/// A fitted model. Unused trailing parameters are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BansimFit {
    pub family: BansimFamily,
    /// Lognormal: mu, sigma. Inverse Gaussian: mu, lambda. Burr: alpha, c, k.
    pub params: [f64; 3],
    pub log_likelihood: f64,
    pub ks_statistic: f64,
    pub n_samples: size_t,
}

impl From<&FitResult> for BansimFit {
    fn from(f: &FitResult) -> Self {
        let mut params = [0.0; 3];
        for (dst, src) in params.iter_mut().zip(f.model.params()) {
            *dst = src;
        }
        Self {
            family: f.model.family().into(),
            params,
            log_likelihood: f.log_likelihood,
            ks_statistic: f.ks_statistic,
            n_samples: f.n_samples,
        }
    }
}

/// Summary of one scheme at one duty cycle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BansimEntry {
    /// `BANSIM_SCHEME_SPR` or `BANSIM_SCHEME_CMR`.
    pub scheme: u32,
    pub duty_cycle_percent: f64,
    /// NaN when the outage curve never reaches 10%.
    pub sinr_at_10pct_outage_db: f64,
    pub has_fit: bool,
    pub best_fit: BansimFit,
}

/// Opaque scenario configuration.
pub struct BansimConfig {
    inner: ScenarioConfig,
}

/// Opaque results of a run.
pub struct BansimResults {
    inner: RunResults,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: BansimStatus, message: impl Into<String>) -> BansimStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> BansimStatus) -> BansimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(BansimStatus::Panic, "panic inside bansim"),
    }
}

fn run_status(e: &RunError) -> BansimStatus {
    match e {
        RunError::Config(_) | RunError::Usage(_) => BansimStatus::ConfigError,
        RunError::Trace(_) | RunError::Channel(_) | RunError::Output { .. } => BansimStatus::TraceError,
        RunError::Invariant(_) => BansimStatus::InvariantViolation,
    }
}

fn fit_status(e: &FitError) -> BansimStatus {
    match e {
        FitError::DomainError(_) | FitError::NonPositiveSample { .. } | FitError::TooFewSamples { .. } => {
            BansimStatus::InvalidArgument
        }
        _ => BansimStatus::FitError,
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, BansimStatus> {
    if s.is_null() {
        return Err(fail(BansimStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(BansimStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn slice_arg<'a>(data: *const f64, len: size_t) -> Result<&'a [f64], BansimStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(BansimStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL;
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bansim_last_error(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bansim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New handle holding the default scenario.
#[no_mangle]
pub extern "C" fn bansim_config_default() -> *mut BansimConfig {
    Box::into_raw(Box::new(BansimConfig { inner: ScenarioConfig::default() }))
}

/// Parses a JSON config. On success `*out` receives a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_from_json(json: *const c_char, out: *mut *mut BansimConfig) -> BansimStatus {
    guard(|| {
        if out.is_null() {
            return fail(BansimStatus::NullPointer, "null output pointer");
        }
        let text = try_status!(str_arg(json));
        match ScenarioConfig::from_json_str(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(BansimConfig { inner: c }));
                BansimStatus::Ok
            }
            Err(e) => fail(BansimStatus::ConfigError, e.to_string()),
        }
    })
}

/// Writes the config as JSON into `buf`. `*written` receives the length
/// without the NUL; when it does not fit, the status is `BufferTooSmall`.
///
/// # Safety
/// `config` must be a live handle; `buf` must hold `len` bytes or be null;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_to_json(
    config: *const BansimConfig,
    buf: *mut c_char,
    len: size_t,
    written: *mut size_t,
) -> BansimStatus {
    guard(|| {
        let (Some(config), false) = (config.as_ref(), written.is_null()) else {
            return fail(BansimStatus::NullPointer, "null argument");
        };
        let json = config.inner.to_json_string();
        *written = json.len();
        if buf.is_null() || len <= json.len() {
            return fail(BansimStatus::BufferTooSmall, format!("need {} bytes", json.len() + 1));
        }
        ptr::copy_nonoverlapping(json.as_ptr() as *const c_char, buf, json.len());
        *buf.add(json.len()) = 0;
        BansimStatus::Ok
    })
}

/// Validates the config; a violation list lands in the last error.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_validate(config: *const BansimConfig) -> BansimStatus {
    guard(|| {
        let Some(config) = config.as_ref() else {
            return fail(BansimStatus::NullPointer, "null config");
        };
        match config.inner.clone().validated() {
            Ok(_) => BansimStatus::Ok,
            Err(ConfigError::Invalid(report)) => fail(BansimStatus::ConfigError, report.to_string()),
            Err(e) => fail(BansimStatus::ConfigError, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_set_seed(config: *mut BansimConfig, seed: u64) -> BansimStatus {
    match config.as_mut() {
        Some(c) => {
            c.inner.seed = seed;
            BansimStatus::Ok
        }
        None => fail(BansimStatus::NullPointer, "null config"),
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_set_trials(config: *mut BansimConfig, trials: u32) -> BansimStatus {
    match config.as_mut() {
        Some(c) => {
            c.inner.trials = trials;
            BansimStatus::Ok
        }
        None => fail(BansimStatus::NullPointer, "null config"),
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_set_total_time_ms(config: *mut BansimConfig, total_ms: f64) -> BansimStatus {
    match config.as_mut() {
        Some(c) => {
            c.inner.time.total_time_ms = total_ms;
            BansimStatus::Ok
        }
        None => fail(BansimStatus::NullPointer, "null config"),
    }
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bansim_config_free(config: *mut BansimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the experiment. `schemes` is a mask of `BANSIM_SCHEME_*`; zero
/// means both. `workers` of zero uses all cores.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_run(
    config: *const BansimConfig,
    schemes: u32,
    workers: u32,
    out: *mut *mut BansimResults,
) -> BansimStatus {
    guard(|| {
        let (Some(config), false) = (config.as_ref(), out.is_null()) else {
            return fail(BansimStatus::NullPointer, "null argument");
        };
        let mut selected = Vec::new();
        if schemes == 0 || schemes & BANSIM_SCHEME_SPR != 0 {
            selected.push(Scheme::Spr);
        }
        if schemes == 0 || schemes & BANSIM_SCHEME_CMR != 0 {
            selected.push(Scheme::Cmr);
        }
        let options = RunOptions {
            schemes: selected,
            workers: (workers > 0).then_some(workers as usize),
            ..RunOptions::default()
        };
        match run_experiment(config.inner.clone(), options) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(BansimResults { inner: r }));
                BansimStatus::Ok
            }
            Err(e) => fail(run_status(&e), e.to_string()),
        }
    })
}

/// Number of (duty cycle, scheme) entries.
///
/// # Safety
/// `results` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bansim_results_len(results: *const BansimResults) -> size_t {
    results.as_ref().map_or(0, |r| r.inner.iter().count())
}

/// # Safety
/// `results` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_results_entry(
    results: *const BansimResults,
    index: size_t,
    out: *mut BansimEntry,
) -> BansimStatus {
    guard(|| {
        let (Some(results), false) = (results.as_ref(), out.is_null()) else {
            return fail(BansimStatus::NullPointer, "null argument");
        };
        let Some(r) = results.inner.iter().nth(index) else {
            return fail(BansimStatus::InvalidArgument, format!("entry {index} out of range"));
        };
        let best = r.fit.as_ref().ok().map(|f| BansimFit::from(&f.best));
        *out = BansimEntry {
            scheme: match r.scheme {
                Scheme::Spr => BANSIM_SCHEME_SPR,
                Scheme::Cmr => BANSIM_SCHEME_CMR,
            },
            duty_cycle_percent: r.duty_cycle_percent,
            sinr_at_10pct_outage_db: r.sinr_at_10pct_outage().unwrap_or(f64::NAN),
            has_fit: best.is_some(),
            best_fit: best.unwrap_or(BansimFit {
                family: BansimFamily::Lognormal,
                params: [0.0; 3],
                log_likelihood: f64::NAN,
                ks_statistic: f64::NAN,
                n_samples: 0,
            }),
        };
        BansimStatus::Ok
    })
}

/// Copies an entry's outage curve. `*len` receives the point count; the
/// arrays must hold `capacity` values each.
///
/// # Safety
/// `results` must be a live handle; the arrays must be writable for
/// `capacity` values; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_results_outage(
    results: *const BansimResults,
    index: size_t,
    gamma_th_db: *mut f64,
    p_out: *mut f64,
    capacity: size_t,
    len: *mut size_t,
) -> BansimStatus {
    guard(|| {
        let (Some(results), false) = (results.as_ref(), len.is_null()) else {
            return fail(BansimStatus::NullPointer, "null argument");
        };
        let Some(r) = results.inner.iter().nth(index) else {
            return fail(BansimStatus::InvalidArgument, format!("entry {index} out of range"));
        };
        let pts = &r.outage.points;
        *len = pts.len();
        if capacity < pts.len() || gamma_th_db.is_null() || p_out.is_null() {
            return fail(BansimStatus::BufferTooSmall, format!("need {} points", pts.len()));
        }
        for (i, p) in pts.iter().enumerate() {
            *gamma_th_db.add(i) = p.gamma_th_db;
            *p_out.add(i) = p.p_out;
        }
        BansimStatus::Ok
    })
}

/// Copies an entry's PDR curve, like [`bansim_results_outage`].
///
/// # Safety
/// As for [`bansim_results_outage`].
#[no_mangle]
pub unsafe extern "C" fn bansim_results_pdr(
    results: *const BansimResults,
    index: size_t,
    sensitivity_dbm: *mut f64,
    pdr: *mut f64,
    capacity: size_t,
    len: *mut size_t,
) -> BansimStatus {
    guard(|| {
        let (Some(results), false) = (results.as_ref(), len.is_null()) else {
            return fail(BansimStatus::NullPointer, "null argument");
        };
        let Some(r) = results.inner.iter().nth(index) else {
            return fail(BansimStatus::InvalidArgument, format!("entry {index} out of range"));
        };
        *len = r.pdr.len();
        if capacity < r.pdr.len() || sensitivity_dbm.is_null() || pdr.is_null() {
            return fail(BansimStatus::BufferTooSmall, format!("need {} points", r.pdr.len()));
        }
        for (i, p) in r.pdr.iter().enumerate() {
            *sensitivity_dbm.add(i) = p.receive_sensitivity_dbm;
            *pdr.add(i) = p.pdr;
        }
        BansimStatus::Ok
    })
}

/// Writes the manifest and result CSVs into `out_dir`.
///
/// # Safety
/// `results` must be a live handle; `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn bansim_results_write(results: *mut BansimResults, out_dir: *const c_char) -> BansimStatus {
    guard(|| {
        let Some(results) = results.as_mut() else {
            return fail(BansimStatus::NullPointer, "null results");
        };
        let dir = PathBuf::from(try_status!(str_arg(out_dir)));
        match write_outputs(&mut results.inner, &dir) {
            Ok(_) => BansimStatus::Ok,
            Err(e) => fail(run_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `results` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bansim_results_free(results: *mut BansimResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// SINR in dB of a link with `n` simultaneous interferers.
///
/// # Safety
/// `interferer_gains_db` must hold `n` values (may be null when `n` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_link_sinr(
    tx_power_dbm: f64,
    desired_gain_db: f64,
    interferer_gains_db: *const f64,
    n: size_t,
    noise_power_dbm: f64,
    out: *mut f64,
) -> BansimStatus {
    if out.is_null() {
        return fail(BansimStatus::NullPointer, "null output pointer");
    }
    let gains = try_status!(slice_arg(interferer_gains_db, n));
    *out = link_sinr(tx_power_dbm, desired_gain_db, gains, NoiseModel { noise_power_dbm });
    BansimStatus::Ok
}

/// Expected transmission count `1 / (1 - outage)`; infinite at outage 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_etx(outage: f64, out: *mut f64) -> BansimStatus {
    if out.is_null() {
        return fail(BansimStatus::NullPointer, "null output pointer");
    }
    match routing::etx(outage) {
        Ok(v) => {
            *out = v;
            BansimStatus::Ok
        }
        Err(e) => fail(BansimStatus::InvalidArgument, e.to_string()),
    }
}

fn model(family: BansimFamily, params: [f64; 3]) -> ModelKind {
    match family {
        BansimFamily::Lognormal => ModelKind::Lognormal { mu: params[0], sigma: params[1] },
        BansimFamily::InverseGaussian => ModelKind::InverseGaussian { mu: params[0], lambda: params[1] },
        BansimFamily::Burr => ModelKind::Burr { alpha: params[0], c: params[1], k: params[2] },
    }
}

/// CDF of a model at `x`. Parameters follow [`BansimFit::params`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_cdf(
    family: BansimFamily,
    p1: f64,
    p2: f64,
    p3: f64,
    x: f64,
    out: *mut f64,
) -> BansimStatus {
    if out.is_null() {
        return fail(BansimStatus::NullPointer, "null output pointer");
    }
    match model(family, [p1, p2, p3]).cdf(x) {
        Ok(v) => {
            *out = v;
            BansimStatus::Ok
        }
        Err(e) => fail(fit_status(&e), e.to_string()),
    }
}

/// Maximum-likelihood fit of one family.
///
/// # Safety
/// `samples` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_fit(
    family: BansimFamily,
    samples: *const f64,
    n: size_t,
    out: *mut BansimFit,
) -> BansimStatus {
    guard(|| {
        if out.is_null() {
            return fail(BansimStatus::NullPointer, "null output pointer");
        }
        let xs = try_status!(slice_arg(samples, n));
        match Family::from(family).fit(xs) {
            Ok(f) => {
                *out = BansimFit::from(&f);
                BansimStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}

/// Fits every family in `family_mask` (`BANSIM_FAMILY_MASK_*`, zero for all)
/// and returns the one with the smallest KS statistic.
///
/// # Safety
/// `samples` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bansim_best_fit(
    samples: *const f64,
    n: size_t,
    family_mask: u32,
    out: *mut BansimFit,
) -> BansimStatus {
    guard(|| {
        if out.is_null() {
            return fail(BansimStatus::NullPointer, "null output pointer");
        }
        let xs = try_status!(slice_arg(samples, n));
        let families: Vec<Family> = Family::ALL
            .into_iter()
            .enumerate()
            .filter(|(i, _)| family_mask == 0 || family_mask & (1 << i) != 0)
            .map(|(_, f)| f)
            .collect();
        match distfit::best_fit(xs, &families) {
            Ok(b) => {
                *out = BansimFit::from(&b.best);
                BansimStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}
