//! C ABI over the `linfx` pipeline.
//!
//! Instances and results are opaque heap handles released with their
//! `lx_*_free` function. Every fallible call returns an [`LxStatus`]; on
//! failure the thread's last error is set and can be read with
//! [`lx_last_error_message`] or [`lx_last_error_json`]. Strings returned by
//! this library are owned by the caller and released with
//! [`lx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use linfx::generators::{gen_diagonal, gen_prop1_instance};
use linfx::pipeline::{run_pipeline, PipelineError, RunConfig, RunResult, Stage};
use linfx::{Error, Instance};

/// Outcome of a call. Values 1 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LxStatus {
    Ok = 0,
    /// Malformed input, failed validation or violated precondition.
    Invalid = 1,
    /// A resampling budget or solver iteration cap ran out.
    Exhausted = 2,
    /// Blocks were found but no positive lower constant could be certified.
    NoCertificate = 3,
    /// An internal consistency check failed.
    Internal = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// The library panicked; the handle arguments are left untouched.
    Panic = 6,
}

pub struct LxInstance(Instance);

pub struct LxResult(RunResult);

/// Run settings. Obtain defaults from [`lx_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LxConfig {
    pub eta: f64,
    pub gamma_cut: f64,
    pub c: f64,
    pub seed: u64,
    pub budget: u32,
    pub full_set_first: bool,
    pub exact: bool,
}

impl From<LxConfig> for RunConfig {
    fn from(c: LxConfig) -> Self {
        RunConfig {
            eta: c.eta,
            gamma_cut: c.gamma_cut,
            c: c.c,
            seed: c.seed,
            budget: c.budget,
            full_set_first: c.full_set_first,
            exact: c.exact,
            timings: false,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<(String, CString)>> = const { RefCell::new(None) };
}

fn set_error(message: String, json: String) {
    let json = CString::new(json).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some((message, json)));
}

fn record(err: &PipelineError) -> LxStatus {
    set_error(err.to_string(), err.to_json().to_string());
    match err.exit_code() {
        1 => LxStatus::Invalid,
        2 => LxStatus::Exhausted,
        3 => LxStatus::NoCertificate,
        _ => LxStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> LxStatus) -> LxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic inside linfx".into(), r#"{"stage":"ffi","reason":"panic","witness":null}"#.into());
            LxStatus::Panic
        }
    }
}

fn null_arg(name: &str) -> LxStatus {
    set_error(format!("{name} is null"), format!(r#"{{"stage":"ffi","reason":"{name} is null","witness":null}}"#));
    LxStatus::NullPointer
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. Release with
/// [`lx_string_free`].
#[no_mangle]
pub extern "C" fn lx_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some((msg, _)) => CString::new(msg.as_str()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    })
}

/// `{"stage", "kind", "reason", "witness"}` of the last failed call, or
/// null. Release with [`lx_string_free`].
#[no_mangle]
pub extern "C" fn lx_last_error_json() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some((_, json)) => json.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn lx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn lx_config_default() -> LxConfig {
    let d = RunConfig::default();
    LxConfig {
        eta: d.eta,
        gamma_cut: d.gamma_cut,
        c: d.c,
        seed: d.seed,
        budget: d.budget,
        full_set_first: d.full_set_first,
        exact: d.exact,
    }
}

/// Parses an instance file's contents.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lx_instance_from_json(json: *const c_char, out: *mut *mut LxInstance) -> LxStatus {
    if json.is_null() {
        return null_arg("json");
    }
    if out.is_null() {
        return null_arg("out");
    }
    guarded(|| {
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return record(&PipelineError::new(Stage::Parse, Error::InvalidInput(e.to_string()))),
        };
        match Instance::from_json(text) {
            Ok(inst) => {
                put(out, LxInstance(inst));
                LxStatus::Ok
            }
            Err(e) => record(&PipelineError::new(Stage::Parse, e)),
        }
    })
}

/// Random frame meeting the Prop-1 hypotheses.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lx_gen_prop1(
    n: usize,
    n_cols: usize,
    gamma: f64,
    density: f64,
    seed: u64,
    out: *mut *mut LxInstance,
) -> LxStatus {
    if out.is_null() {
        return null_arg("out");
    }
    guarded(|| match gen_prop1_instance(n, n_cols, gamma, density, seed) {
        Ok(f) => {
            put(out, LxInstance(Instance::from_frame(&f)));
            LxStatus::Ok
        }
        Err(e) => record(&PipelineError::new(Stage::Generate, e)),
    })
}

/// Frame with `value` on the diagonal.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lx_gen_diagonal(n: usize, n_cols: usize, value: f64, out: *mut *mut LxInstance) -> LxStatus {
    if out.is_null() {
        return null_arg("out");
    }
    guarded(|| match gen_diagonal(n, n_cols, value) {
        Ok(f) => {
            put(out, LxInstance(Instance::from_frame(&f)));
            LxStatus::Ok
        }
        Err(e) => record(&PipelineError::new(Stage::Generate, e)),
    })
}

/// Serialized instance; release with [`lx_string_free`]. Null if `inst`
/// is null.
///
/// # Safety
/// `inst` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_instance_to_json(inst: *const LxInstance) -> *mut c_char {
    match inst.as_ref() {
        Some(i) => CString::new(i.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `inst` must come from this library or be null, and not be used after.
#[no_mangle]
pub unsafe extern "C" fn lx_instance_free(inst: *mut LxInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Runs the pipeline. `config` may be null for defaults.
///
/// # Safety
/// `inst` must be a live handle, `config` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_run(inst: *const LxInstance, config: *const LxConfig, out: *mut *mut LxResult) -> LxStatus {
    let Some(inst) = inst.as_ref() else { return null_arg("inst") };
    if out.is_null() {
        return null_arg("out");
    }
    let config: RunConfig = config.as_ref().map_or_else(RunConfig::default, |c| (*c).into());
    guarded(|| match run_pipeline(&inst.0, &config) {
        Ok(r) => {
            put(out, LxResult(r));
            LxStatus::Ok
        }
        Err(e) => record(&e),
    })
}

/// Number of blocks, 0 for a null handle.
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_result_m(res: *const LxResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.m)
}

/// `U / L_cert`, NaN for a null handle.
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_result_distance(res: *const LxResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.distance)
}

/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_result_upper(res: *const LxResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.upper)
}

/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_result_lower_cert(res: *const LxResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.lower_cert)
}

/// Result JSON as written by the CLI; release with [`lx_string_free`].
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lx_result_to_json(res: *const LxResult) -> *mut c_char {
    match res.as_ref() {
        Some(r) => CString::new(r.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `res` must come from this library or be null, and not be used after.
#[no_mangle]
pub unsafe extern "C" fn lx_result_free(res: *mut LxResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
