//! C ABI over `scgir-core`.
//!
//! Handles are opaque heap objects created by `*_new`/`*_load` and released
//! by the matching `*_free`. Every fallible call returns an [`ScgirStatus`];
//! the message of the most recent failure on the calling thread is available
//! through [`scgir_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use scgir_core::channel::{noise_var_from_snr_db, simulate_link, ChannelConfig, ChannelModel, LinkConfig};
use scgir_core::encoder::{scgir_loss, CrossCorrMatrix};
use scgir_core::harness::pipeline::run_pipeline;
use scgir_core::harness::ExperimentConfig;
use scgir_core::numeric::{Rng, Tensor};
use scgir_core::ScgirError;

/// Status codes. Values 1 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScgirStatus {
    Ok = 0,
    Error = 1,
    Config = 2,
    Data = 3,
    Divergence = 4,
    Io = 5,
    NullPointer = 6,
    InvalidArgument = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScgirChannel {
    Awgn = 0,
    Rayleigh = 1,
}

/// Opaque experiment configuration.
pub struct ScgirConfig {
    inner: ExperimentConfig,
}

/// Opaque random stream.
pub struct ScgirRng {
    inner: Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ScgirStatus, msg: impl Into<String>) -> ScgirStatus {
    set_error(msg.into());
    status
}

fn from_error(e: ScgirError) -> ScgirStatus {
    let status = match e.exit_code() {
        2 => ScgirStatus::Config,
        3 => ScgirStatus::Data,
        4 => ScgirStatus::Divergence,
        5 => ScgirStatus::Io,
        _ => ScgirStatus::Error,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> ScgirStatus) -> ScgirStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ScgirStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ScgirStatus> {
    if p.is_null() {
        return Err(fail(ScgirStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ScgirStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `s` plus a NUL into `buf` when it fits; returns the size needed.
unsafe fn copy_out(s: &[u8], buf: *mut c_char, len: usize) -> usize {
    let need = s.len() + 1;
    if !buf.is_null() && len >= need {
        ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
        *buf.add(s.len()) = 0;
    }
    need
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scgir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Writes the last error message of this thread into `buf` and returns the
/// buffer size it needs (0 when there is no error). Nothing is written when
/// `len` is too small.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn scgir_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => copy_out(msg.as_bytes(), buf, len),
        None => 0,
    })
}

/// Default configuration. Never null.
#[no_mangle]
pub extern "C" fn scgir_config_new() -> *mut ScgirConfig {
    Box::into_raw(Box::new(ScgirConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parses a config file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scgir_config_load(path: *const c_char, out: *mut *mut ScgirConfig) -> ScgirStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScgirStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ExperimentConfig::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ScgirConfig { inner }));
                ScgirStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets one `key = value` entry, with the same keys as the config file.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn scgir_config_set(
    cfg: *mut ScgirConfig,
    key: *const c_char,
    value: *const c_char,
) -> ScgirStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(ScgirStatus::NullPointer, "config is null");
        };
        let (key, value) = match (str_arg(key, "key"), str_arg(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match cfg.inner.set(key, value) {
            Ok(()) => ScgirStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Writes the 64-hex-digit config digest plus NUL; `len` must be at least 65.
///
/// # Safety
/// `cfg` must come from this library; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn scgir_config_digest(cfg: *const ScgirConfig, buf: *mut c_char, len: usize) -> ScgirStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(ScgirStatus::NullPointer, "config is null");
        };
        if buf.is_null() {
            return fail(ScgirStatus::NullPointer, "buffer is null");
        }
        let d = cfg.inner.digest();
        if copy_out(d.as_bytes(), buf, len) > len {
            return fail(ScgirStatus::InvalidArgument, format!("digest needs {} bytes", d.len() + 1));
        }
        ScgirStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scgir_config_free(cfg: *mut ScgirConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Full run into the configured output directory.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn scgir_run_pipeline(cfg: *const ScgirConfig) -> ScgirStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(ScgirStatus::NullPointer, "config is null");
        };
        match run_pipeline(&cfg.inner) {
            Ok(_) => ScgirStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn scgir_rng_new(seed: u64) -> *mut ScgirRng {
    Box::into_raw(Box::new(ScgirRng { inner: Rng::seed(seed) }))
}

/// # Safety
/// `rng` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scgir_rng_free(rng: *mut ScgirRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

#[no_mangle]
pub extern "C" fn scgir_solarize(x: f64) -> f64 {
    scgir_core::augment::solarize_value(x)
}

#[no_mangle]
pub extern "C" fn scgir_noise_var_from_snr_db(snr_db: f64) -> f64 {
    noise_var_from_snr_db(snr_db)
}

/// Loss of a row-major `d × d` cross-correlation matrix.
///
/// # Safety
/// `c` must hold `d * d` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scgir_loss_value(c: *const f64, d: usize, lambda: f64, out: *mut f64) -> ScgirStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(ScgirStatus::NullPointer, "matrix or output is null");
        }
        let Some(len) = d.checked_mul(d).filter(|&n| n > 0) else {
            return fail(ScgirStatus::InvalidArgument, "d must be positive");
        };
        let values = std::slice::from_raw_parts(c, len).to_vec();
        let m = match Tensor::new(vec![d, d], values).and_then(CrossCorrMatrix::new) {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        *out = scgir_loss(&m, lambda).total;
        ScgirStatus::Ok
    })
}

/// Sends `n` reals over one channel draw at compression ratio `ratio`,
/// with MMSE equalization, and writes the `n` received reals to `out`.
///
/// # Safety
/// `rng` must come from this library; `z` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn scgir_simulate_link(
    rng: *mut ScgirRng,
    z: *const f64,
    n: usize,
    ratio: f64,
    model: ScgirChannel,
    snr_db: f64,
    out: *mut f64,
) -> ScgirStatus {
    guard(|| {
        let Some(rng) = rng.as_mut() else {
            return fail(ScgirStatus::NullPointer, "rng is null");
        };
        if z.is_null() || out.is_null() {
            return fail(ScgirStatus::NullPointer, "input or output is null");
        }
        let z = std::slice::from_raw_parts(z, n);
        let model = match model {
            ScgirChannel::Awgn => ChannelModel::Awgn,
            ScgirChannel::Rayleigh => ChannelModel::Rayleigh,
        };
        let link = LinkConfig::new(ratio, n);
        match simulate_link(z, &link, &ChannelConfig::from_snr_db(model, snr_db), &mut rng.inner) {
            Ok(y) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&y);
                ScgirStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
