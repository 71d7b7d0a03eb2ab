//! C ABI over the chanpred toolkit.
//!
//! Traces and models cross the boundary as opaque handles created by the
//! `*_new`/`*_load` style functions and released with the matching
//! `*_free`. Every fallible call returns a [`ChanpredStatus`]; on failure
//! the message is available from [`chanpred_last_error_message`] on the
//! same thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chanpred::coherence::{autocorrelation, coherence_time, default_max_lag, output_length_for};
use chanpred::matrix::Matrix;
use chanpred::models::{build_model, Family, Model, ModelDescriptor};
use chanpred::preprocess::{downsample_mean, extract_small_scale};
use chanpred::signal::{simulate_clarke, ClarkeConfig, SignalTrace};
use chanpred::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChanpredStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Trace = 4,
    Shape = 5,
    Numeric = 6,
    Io = 7,
    Format = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque handle to a sampled trace.
pub struct ChanpredTrace {
    inner: SignalTrace,
}

/// Opaque handle to a model.
pub struct ChanpredModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ChanpredStatus {
    match err {
        Error::Stage { source, .. } => status_of(source),
        Error::Config(_) => ChanpredStatus::Config,
        Error::Trace(_)
        | Error::EmptyTrace
        | Error::MissingColumn(_)
        | Error::BadCell { .. }
        | Error::NonPositiveLocalMean(_)
        | Error::DegenerateRange(_)
        | Error::ZeroVariance
        | Error::NoCrossing { .. } => ChanpredStatus::Trace,
        Error::Shape(_) => ChanpredStatus::Shape,
        Error::NonFiniteGradient(_) | Error::Diverged(_) | Error::RankDeficient(_) => ChanpredStatus::Numeric,
        Error::Io { .. } => ChanpredStatus::Io,
        Error::Format(_) | Error::Csv(_) => ChanpredStatus::Format,
    }
}

enum Failure {
    Lib(Error),
    Status(ChanpredStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChanpredStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChanpredStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            ChanpredStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(ChanpredStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(ChanpredStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `cap` bytes. Returns the length
/// needed including the terminator, or 0 if there is no error.
///
/// # Safety
/// `buf` must be valid for `cap` writable bytes or null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn chanpred_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chanpred_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Simulates the linear power of a Clarke fading channel.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_simulate(
    doppler_hz: f64,
    num_sinusoids: usize,
    duration_s: f64,
    sample_rate_hz: f64,
    rician_k: f64,
    seed: u64,
    out: *mut *mut ChanpredTrace,
) -> ChanpredStatus {
    guard(|| {
        let cfg = ClarkeConfig { doppler_hz, num_sinusoids, duration_s, sample_rate_hz, rician_k, seed };
        let inner = simulate_clarke(&cfg)?;
        put(out, ChanpredTrace { inner })
    })
}

/// Wraps a copy of `len` samples.
///
/// # Safety
/// `samples` must be valid for `len` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate_hz: f64,
    out: *mut *mut ChanpredTrace,
) -> ChanpredStatus {
    guard(|| {
        let data = slice(samples, len, "samples")?.to_vec();
        put(out, ChanpredTrace { inner: SignalTrace::new(data, sample_rate_hz, "ffi")? })
    })
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_len(trace: *const ChanpredTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.len())
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_sample_rate(trace: *const ChanpredTrace) -> f64 {
    trace.as_ref().map_or(0.0, |t| t.inner.sample_rate_hz())
}

/// Copies the samples into `buf`, which must hold the whole trace.
///
/// # Safety
/// `trace` must be a live handle; `buf` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_copy_samples(
    trace: *const ChanpredTrace,
    buf: *mut f64,
    cap: usize,
) -> ChanpredStatus {
    guard(|| {
        let t = deref(trace, "trace")?;
        let n = t.inner.len();
        if cap < n {
            return Err(Failure::Status(ChanpredStatus::BufferTooSmall, format!("need {n} values, buffer holds {cap}")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(t.inner.samples().as_ptr(), buf, n);
        Ok(())
    })
}

/// Block-mean downsampling into a new handle.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_downsample(
    trace: *const ChanpredTrace,
    factor: usize,
    out: *mut *mut ChanpredTrace,
) -> ChanpredStatus {
    guard(|| {
        let t = deref(trace, "trace")?;
        put(out, ChanpredTrace { inner: downsample_mean(&t.inner, factor)? })
    })
}

/// Small-scale fading (trace divided by its local mean) into a new handle.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_small_scale(
    trace: *const ChanpredTrace,
    window: usize,
    out: *mut *mut ChanpredTrace,
) -> ChanpredStatus {
    guard(|| {
        let t = deref(trace, "trace")?;
        put(out, ChanpredTrace { inner: extract_small_scale(&t.inner, window)? })
    })
}

/// Seconds until the autocorrelation first falls to `threshold`. A
/// `max_lag` of 0 selects the default search range.
///
/// # Safety
/// `trace` must be a live handle; `out_s` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_coherence_time(
    trace: *const ChanpredTrace,
    threshold: f64,
    max_lag: usize,
    out_s: *mut f64,
) -> ChanpredStatus {
    guard(|| {
        let t = deref(trace, "trace")?;
        if out_s.is_null() {
            return Err(null("out_s"));
        }
        let lag = if max_lag == 0 { default_max_lag(t.inner.len()) } else { max_lag };
        *out_s = coherence_time(&autocorrelation(&t.inner, lag)?, threshold)?;
        Ok(())
    })
}

/// Whole samples covered by a coherence time, at least one.
#[no_mangle]
pub extern "C" fn chanpred_output_length_for(coherence_time_s: f64, sample_rate_hz: f64) -> usize {
    output_length_for(coherence_time_s, sample_rate_hz)
}

/// # Safety
/// `trace` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_trace_free(trace: *mut ChanpredTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Builds an untrained model with default sizes for the family
/// (`linear`, `ffn`, `lstm`, `gru` or `cnn1d`).
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_new(
    family: *const c_char,
    layers: usize,
    input_len: usize,
    output_len: usize,
    seed: u64,
    out: *mut *mut ChanpredModel,
) -> ChanpredStatus {
    guard(|| {
        let family: Family = c_str(family, "family")?.parse()?;
        let model = build_model(&ModelDescriptor::new(family, layers, input_len, output_len), seed)?;
        put(out, ChanpredModel { inner: model })
    })
}

/// Loads a model file written by the toolkit.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_load(path: *const c_char, out: *mut *mut ChanpredModel) -> ChanpredStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        put(out, ChanpredModel { inner: Model::load(path)? })
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_save(model: *const ChanpredModel, path: *const c_char) -> ChanpredStatus {
    guard(|| {
        let m = deref(model, "model")?;
        m.inner.save(c_str(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_input_len(model: *const ChanpredModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.descriptor.input_len)
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_output_len(model: *const ChanpredModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.descriptor.output_len)
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_parameter_count(model: *const ChanpredModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.parameter_count())
}

/// Predicts `rows` windows stored row-major in `inputs`
/// (`rows * input_len` values) into `outputs` (`rows * output_len`).
///
/// # Safety
/// `model` must be a live handle; `inputs` valid for `rows * input_len`
/// reads; `outputs` valid for `out_cap` writes.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_predict(
    model: *const ChanpredModel,
    inputs: *const f64,
    rows: usize,
    outputs: *mut f64,
    out_cap: usize,
) -> ChanpredStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let (tx, ty) = (m.inner.descriptor.input_len, m.inner.descriptor.output_len);
        if rows == 0 {
            return Err(Failure::Status(ChanpredStatus::InvalidArgument, "no input rows".into()));
        }
        if out_cap < rows * ty {
            return Err(Failure::Status(
                ChanpredStatus::BufferTooSmall,
                format!("need {} outputs, buffer holds {out_cap}", rows * ty),
            ));
        }
        if outputs.is_null() {
            return Err(null("outputs"));
        }
        let x = Matrix::from_vec(rows, tx, slice(inputs, rows * tx, "inputs")?.to_vec())?;
        let y = m.inner.predict(&x)?;
        ptr::copy_nonoverlapping(y.as_slice().as_ptr(), outputs, rows * ty);
        Ok(())
    })
}

/// # Safety
/// `model` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn chanpred_model_free(model: *mut ChanpredModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
