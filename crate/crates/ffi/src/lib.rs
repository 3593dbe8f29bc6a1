//! C ABI over the crosskerr scenario runners and a few closed forms.
//!
//! Conventions:
//! * every fallible call returns a [`CkStatus`]; on failure a message is
//!   kept per thread and read back with [`ck_last_error`];
//! * handles are opaque, created by `*_new`/`ck_run` and released by the
//!   matching `*_free` (which accept NULL);
//! * strings are NUL-terminated UTF-8. Calls that copy out a string take a
//!   buffer and its capacity, always report the required size (NUL
//!   included) through `needed`, and return `CK_BUFFER_TOO_SMALL` when the
//!   buffer cannot hold it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use crosskerr::scenario::{self, RunOptions, RunOutput, ScenarioConfig};
use crosskerr::{analytic, Error, C64};
use serde_json::Value;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    NotFound = 4,
    InvalidArgument = 5,
    Config = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for CkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::InvalidScenario(_) => CkStatus::Config,
            Error::Io(_) => CkStatus::Io,
            Error::InvalidArgument(_) | Error::InvalidDimension(_) | Error::Shape(_) | Error::InvalidState(_) => {
                CkStatus::InvalidArgument
            }
            Error::DegenerateParameters(_)
            | Error::IntegrationFailure(_)
            | Error::NoUniqueSteadyState(_)
            | Error::UndefinedStatistic(_)
            | Error::Truncation { .. } => CkStatus::Numerical,
        }
    }
}

/// Parsed and validated scenario configuration.
pub struct CkConfig(ScenarioConfig);

/// Finished run: tables and Wigner fields held in memory.
pub struct CkRun(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

struct Fail(CkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(CkStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> CkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CkStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside crosskerr");
            CkStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(CkStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| Fail(CkStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Copy `bytes` plus a terminating NUL into `buf`.
unsafe fn copy_out(bytes: &[u8], buf: *mut c_char, cap: usize, needed: *mut usize) -> FfiResult {
    let need = bytes.len() + 1;
    if !needed.is_null() {
        *needed = need;
    }
    if buf.is_null() || cap < need {
        return Err(Fail(CkStatus::BufferTooSmall, format!("buffer needs {need} bytes")));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ck_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse a JSON config and apply `n_overrides` `dotted.key=value` strings.
///
/// # Safety
/// `json` must be a valid C string; `overrides` must point to
/// `n_overrides` valid C strings (it may be NULL when `n_overrides` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_config_new(
    json: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    out: *mut *mut CkConfig,
) -> CkStatus {
    guard(|| {
        non_null(out, "out")?;
        let doc: Value = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        let mut ov = Vec::with_capacity(n_overrides);
        if n_overrides > 0 {
            non_null(overrides, "overrides")?;
            for i in 0..n_overrides {
                ov.push(str_arg(*overrides.add(i), "override")?.to_owned());
            }
        }
        let cfg = ScenarioConfig::from_value(doc, &ov)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(CkConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from [`ck_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ck_config_free(cfg: *mut CkConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Canonical JSON of the resolved config (presets and defaults applied).
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ck_config_json(
    cfg: *const CkConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CkStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        copy_out((*cfg).0.canonical_json()?.as_bytes(), buf, cap, needed)
    })
}

/// Content hash of the resolved config, as written into every output.
///
/// # Safety
/// As for [`ck_config_json`].
#[no_mangle]
pub unsafe extern "C" fn ck_config_hash(
    cfg: *const CkConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CkStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        copy_out((*cfg).0.content_hash()?.as_bytes(), buf, cap, needed)
    })
}

/// Run the scenario. `jobs` = 0 uses one worker per core.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ck_run(cfg: *const CkConfig, jobs: usize, out: *mut *mut CkRun) -> CkStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let opts = RunOptions { jobs: (jobs > 0).then_some(jobs), seed: None };
        *out = Box::into_raw(Box::new(CkRun(scenario::run(&(*cfg).0, &opts)?)));
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`ck_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ck_run_free(run: *mut CkRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// 0 when clean, 2 when some rows were flagged (the CLI exit code).
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_run_exit_code(run: *const CkRun) -> i32 {
    if run.is_null() {
        return -1;
    }
    (*run).0.exit_code()
}

/// Number of tables followed by number of Wigner fields.
///
/// # Safety
/// `run` must be a live handle; the out pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ck_run_counts(run: *const CkRun, n_tables: *mut usize, n_wigners: *mut usize) -> CkStatus {
    guard(|| {
        non_null(run, "run")?;
        if !n_tables.is_null() {
            *n_tables = (*run).0.tables.len();
        }
        if !n_wigners.is_null() {
            *n_wigners = (*run).0.wigners.len();
        }
        Ok(())
    })
}

/// Name of output `index`: tables first, then Wigner fields.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ck_run_output_name(
    run: *const CkRun,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CkStatus {
    guard(|| {
        non_null(run, "run")?;
        let r = &(*run).0;
        let name = r
            .tables
            .iter()
            .map(|t| t.name.as_str())
            .chain(r.wigners.iter().map(|w| w.name.as_str()))
            .nth(index)
            .ok_or_else(|| Fail(CkStatus::NotFound, format!("no output with index {index}")))?;
        copy_out(name.as_bytes(), buf, cap, needed)
    })
}

/// CSV text of a table or Wigner field, byte-identical to the file the CLI writes.
///
/// # Safety
/// `run` must be a live handle, `name` a valid C string; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ck_run_csv(
    run: *const CkRun,
    name: *const c_char,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CkStatus {
    guard(|| {
        non_null(run, "run")?;
        let r = &(*run).0;
        let name = str_arg(name, "name")?;
        let bytes = if let Some(t) = r.table(name) {
            r.table_csv(t)?
        } else if let Some(w) = r.wigner(name) {
            r.wigner_csv(w)?
        } else {
            return Err(Fail(CkStatus::NotFound, format!("no output named '{name}'")));
        };
        copy_out(&bytes, buf, cap, needed)
    })
}

/// Write every output and `manifest.json` into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ck_run_write(run: *const CkRun, dir: *const c_char) -> CkStatus {
    guard(|| {
        non_null(run, "run")?;
        (*run).0.write(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Closed-form overlap `F(t)` of the full and approximate evolutions from `|m⟩_a|0⟩_b`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_fidelity_closed_form(
    m: u32,
    chi: f64,
    beta_ss_mag: f64,
    delta_b: f64,
    t: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = analytic::fidelity_closed_form(m, chi, beta_ss_mag, delta_b, t)?;
        Ok(())
    })
}

/// Branch probabilities of the `|±⟩_a` measurement for displacement `η` and phase `ϑ`.
///
/// # Safety
/// `p_plus` and `p_minus` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_plus_minus_probabilities(
    eta_re: f64,
    eta_im: f64,
    vartheta: f64,
    p_plus: *mut f64,
    p_minus: *mut f64,
) -> CkStatus {
    guard(|| {
        non_null(p_plus, "p_plus")?;
        non_null(p_minus, "p_minus")?;
        let (p, m) = analytic::plus_minus_probabilities(C64::new(eta_re, eta_im), vartheta);
        *p_plus = p;
        *p_minus = m;
        Ok(())
    })
}
