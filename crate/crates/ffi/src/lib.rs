//! C ABI for `oufreq`.
//!
//! Every fallible function returns an [`OufreqStatus`]; on failure the message
//! is available from [`oufreq_last_error`] on the same thread. Handles are
//! created by `*_new`/`oufreq_simulate` and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oufreq::cli::RunConfig;
use oufreq::estimators::mle;
use oufreq::filter::run_filter;
use oufreq::inference::{fisher_eps_from, fisher_limit, log_likelihood, score_from};
use oufreq::{simulate, Error, ModelConfig, SamplePath, SignalSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OufreqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    OutOfRange = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Model parameters together with the signal shape.
pub struct OufreqModel {
    config: ModelConfig,
    signal: SignalSpec,
}

/// A simulated sample path.
pub struct OufreqPath {
    path: SamplePath,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OufreqEstimate {
    pub theta_hat: f64,
    pub normalized_error: f64,
    pub loglik_at_hat: f64,
    pub se_hat: f64,
    pub iterations: u64,
    pub converged: bool,
    pub boundary: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> OufreqStatus {
    match err {
        Error::InvalidSignal(_) | Error::InvalidConfig(_) | Error::Json(_) | Error::Io(_) => {
            OufreqStatus::InvalidConfig
        }
        Error::OutOfRange { .. } => OufreqStatus::OutOfRange,
        _ => OufreqStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), (OufreqStatus, String)>>(f: F) -> OufreqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OufreqStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OufreqStatus::Panic
        }
    }
}

fn lib<T>(r: oufreq::Result<T>) -> Result<T, (OufreqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (OufreqStatus, String) {
    (OufreqStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (OufreqStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), (OufreqStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn oufreq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oufreq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference model (`f(s) = 2 + cos(2 pi s)`, `theta = 1`, `T = 10`) at noise
/// level `epsilon` with the largest stable step.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn oufreq_model_new_reference(epsilon: f64, out: *mut *mut OufreqModel) -> OufreqStatus {
    guard(|| {
        let config = ModelConfig::reference(epsilon);
        let signal = SignalSpec::default();
        lib(config.validate(&signal))?;
        write_out(out, Box::into_raw(Box::new(OufreqModel { config, signal })), "out")
    })
}

/// Model from a JSON document with optional `model` and `signal` sections,
/// in the same format as the command-line configuration file.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_model_from_json(json: *const c_char, out: *mut *mut OufreqModel) -> OufreqStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (OufreqStatus::InvalidArgument, "json is not UTF-8".to_string()))?;
        let run = lib(RunConfig::from_json(text))?;
        let config = run.model();
        lib(config.validate(&run.signal))?;
        write_out(
            out,
            Box::into_raw(Box::new(OufreqModel {
                config,
                signal: run.signal,
            })),
            "out",
        )
    })
}

/// # Safety
/// `model` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn oufreq_model_set_seed(model: *mut OufreqModel, seed: u64) -> OufreqStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.config.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `model` must be a handle from this library or null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oufreq_model_free(model: *mut OufreqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `I_0(theta)` for the model's horizon, `b` and signal.
///
/// # Safety
/// `model` must be a valid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_fisher_limit(model: *const OufreqModel, theta: f64, out: *mut f64) -> OufreqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let v = lib(fisher_limit(theta, m.config.horizon, m.config.b, &m.signal))?;
        write_out(out, v, "out")
    })
}

/// Simulates one path with the model's seed.
///
/// # Safety
/// `model` must be a valid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_simulate(model: *const OufreqModel, out: *mut *mut OufreqPath) -> OufreqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let path = lib(simulate(&m.config, &m.signal))?;
        write_out(
            out,
            Box::into_raw(Box::new(OufreqPath { path })),
            "out",
        )
    })
}

/// Number of grid points `N + 1`; zero for a null handle.
///
/// # Safety
/// `path` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn oufreq_path_len(path: *const OufreqPath) -> usize {
    path.as_ref().map_or(0, |p| p.path.obs.x.len())
}

/// Grid step `h`; NaN for a null handle.
///
/// # Safety
/// `path` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn oufreq_path_step(path: *const OufreqPath) -> f64 {
    path.as_ref().map_or(f64::NAN, |p| p.path.obs.step)
}

unsafe fn copy_series(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (OufreqStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err((
            OufreqStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the observed `X(t_i)` into `buf` (at least `oufreq_path_len` values).
///
/// # Safety
/// `path` must be a valid handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oufreq_path_copy_x(path: *const OufreqPath, buf: *mut f64, len: usize) -> OufreqStatus {
    guard(|| copy_series(&deref(path, "path")?.path.obs.x, buf, len))
}

/// Copies the hidden `Y(t_i)` into `buf` (at least `oufreq_path_len` values).
///
/// # Safety
/// `path` must be a valid handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oufreq_path_copy_y(path: *const OufreqPath, buf: *mut f64, len: usize) -> OufreqStatus {
    guard(|| copy_series(&deref(path, "path")?.path.y, buf, len))
}

/// # Safety
/// `path` must be a handle from this library or null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oufreq_path_free(path: *mut OufreqPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// `ln V(theta)` for the path under the model's parameters. The path must have
/// been simulated on the model's grid.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_log_likelihood(
    model: *const OufreqModel,
    path: *const OufreqPath,
    theta: f64,
    out: *mut f64,
) -> OufreqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(path, "path")?;
        let v = lib(log_likelihood(theta, &p.path.obs, &m.config, &m.signal))?;
        write_out(out, v, "out")
    })
}

unsafe fn with_filter(
    model: *const OufreqModel,
    path: *const OufreqPath,
    theta: f64,
    out: *mut f64,
    stat: fn(&oufreq::filter::FilterOutput) -> oufreq::Result<f64>,
) -> OufreqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(path, "path")?;
        let f = lib(run_filter(theta, &p.path.obs, &m.config, &m.signal, true))?;
        write_out(out, lib(stat(&f))?, "out")
    })
}

/// Normalized score `Delta_eps(theta)`.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_score(
    model: *const OufreqModel,
    path: *const OufreqPath,
    theta: f64,
    out: *mut f64,
) -> OufreqStatus {
    with_filter(model, path, theta, out, score_from)
}

/// `eps I_eps(theta)`.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_fisher_eps(
    model: *const OufreqModel,
    path: *const OufreqPath,
    theta: f64,
    out: *mut f64,
) -> OufreqStatus {
    with_filter(model, path, theta, out, fisher_eps_from)
}

/// Maximum likelihood estimate over the model's parameter interval.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oufreq_mle(
    model: *const OufreqModel,
    path: *const OufreqPath,
    out: *mut OufreqEstimate,
) -> OufreqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(path, "path")?;
        let r = lib(mle(&p.path.obs, &m.config, &m.signal))?;
        write_out(
            out,
            OufreqEstimate {
                theta_hat: r.theta_hat,
                normalized_error: r.normalized_error,
                loglik_at_hat: r.loglik_at_hat,
                se_hat: r.se_hat,
                iterations: r.iterations as u64,
                converged: r.converged,
                boundary: r.boundary,
            },
            "out",
        )
    })
}
