//! C ABI over the kato-lab library.
//!
//! Handles are opaque pointers created by `kato_*_new`/`kato_*_from_*` and
//! released by the matching `kato_*_free`. Every fallible call returns a
//! [`KatoStatus`]; on failure [`kato_last_error`] describes what went wrong on
//! the calling thread. Strings returned by the library are freed with
//! [`kato_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kato_lab::foliation::{build_beta_schedule, validate_layer_exponent, validate_strip_exponent, LayerMode};
use kato_lab::harness::{self, CheckReport, ExperimentConfig, ExperimentReport};
use kato_lab::{Error, ErrorClass};

/// Status codes; the nonzero values match the command-line exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, index out of range or a too-small buffer.
    InvalidArgument = 1,
    /// Inadmissible exponents, ladder, grid or config text.
    ConfigError = 2,
    /// A computation or the file system failed.
    RunFailure = 3,
    /// Outputs exist but an acceptance property fails.
    AcceptanceFailure = 4,
    /// The library panicked; the handle involved should be discarded.
    Panic = 5,
}

/// Layer the exponent schedule targets.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoLayerMode {
    /// Layer of width proportional to `nu`.
    Kato = 0,
    /// Thinner layer of width `nu^a`.
    Smooth = 1,
}

/// Opaque experiment configuration.
pub struct KatoConfig {
    inner: ExperimentConfig,
}

/// Opaque ladder report.
pub struct KatoReport {
    inner: ExperimentReport,
}

/// One ladder rung. Quantities that do not apply are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoLadderRow {
    pub nu: f64,
    pub kato_total: f64,
    pub global_total: f64,
    pub balance_residual: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    /// Difference to the next finer rung in `L^3(0,T; L^3)` away from the walls.
    pub l3_diff_to_next: f64,
    pub linf_l2_diff_to_next: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: KatoStatus, msg: impl Into<String>) -> KatoStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> KatoStatus {
    let status = match e.class() {
        ErrorClass::Config => KatoStatus::ConfigError,
        ErrorClass::Run => KatoStatus::RunFailure,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`KatoStatus::Panic`].
fn guard(f: impl FnOnce() -> KatoStatus) -> KatoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(KatoStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, KatoStatus> {
    if p.is_null() {
        return Err(fail(KatoStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KatoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, KatoStatus> {
    p.as_mut()
        .ok_or_else(|| fail(KatoStatus::InvalidArgument, format!("{what} is null")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into the library on the same thread.
#[no_mangle]
pub extern "C" fn kato_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kato_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kato_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exponent schedule `beta_0 = 0 < ... < beta_N` for `alpha`.
///
/// `a` is ignored in Kato mode. Writes up to `capacity` exponents to `betas`
/// and the full count to `len`; a too-small buffer returns
/// `InvalidArgument` with `len` still set, so callers can size and retry.
///
/// # Safety
/// `betas` must hold `capacity` doubles (it may be null when `capacity` is 0);
/// `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kato_beta_schedule(
    alpha: f64,
    mode: KatoLayerMode,
    a: f64,
    betas: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> KatoStatus {
    guard(|| {
        let len = tri!(out_arg(len, "len"));
        let mode = match mode {
            KatoLayerMode::Kato => LayerMode::KatoLayer,
            KatoLayerMode::Smooth => LayerMode::SmoothLayer { a },
        };
        let s = match build_beta_schedule(alpha, mode) {
            Ok(s) => s,
            Err(e) => return from_error(&e),
        };
        *len = s.betas.len();
        if capacity < s.betas.len() {
            return fail(
                KatoStatus::InvalidArgument,
                format!("buffer holds {capacity} exponents, {} needed", s.betas.len()),
            );
        }
        if betas.is_null() {
            return fail(KatoStatus::InvalidArgument, "betas is null");
        }
        std::slice::from_raw_parts_mut(betas, s.betas.len()).copy_from_slice(&s.betas);
        KatoStatus::Ok
    })
}

/// Checks `1 < a < 3/(5 - 6 alpha)` and, when `p` is not NaN, `p > 6/(3 alpha - 1)`.
#[no_mangle]
pub extern "C" fn kato_validate_smooth_mode(alpha: f64, a: f64, p: f64) -> KatoStatus {
    guard(|| {
        if let Err(e) = validate_layer_exponent(alpha, a) {
            return from_error(&e);
        }
        if !p.is_nan() {
            if let Err(e) = validate_strip_exponent(alpha, p) {
                return from_error(&e);
            }
        }
        KatoStatus::Ok
    })
}

/// Default configuration (five-rung ladder, shear-layer data).
#[no_mangle]
pub extern "C" fn kato_config_new() -> *mut KatoConfig {
    Box::into_raw(Box::new(KatoConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parses a TOML configuration and checks that it resolves.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kato_config_from_toml(toml: *const c_char, out: *mut *mut KatoConfig) -> KatoStatus {
    guard(|| {
        let out = tri!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let text = tri!(str_arg(toml, "toml"));
        let cfg = match ExperimentConfig::from_toml(text) {
            Ok(c) => c,
            Err(e) => return from_error(&e),
        };
        if let Err(e) = cfg.resolve() {
            return from_error(&e);
        }
        *out = Box::into_raw(Box::new(KatoConfig { inner: cfg }));
        KatoStatus::Ok
    })
}

/// Serializes a configuration as TOML.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes. Free the
/// result with [`kato_string_free`].
#[no_mangle]
pub unsafe extern "C" fn kato_config_to_toml(cfg: *const KatoConfig, out: *mut *mut c_char) -> KatoStatus {
    guard(|| {
        let out = tri!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let Some(cfg) = cfg.as_ref() else {
            return fail(KatoStatus::InvalidArgument, "config is null");
        };
        match CString::new(cfg.inner.to_toml()) {
            Ok(s) => {
                *out = s.into_raw();
                KatoStatus::Ok
            }
            Err(_) => fail(KatoStatus::RunFailure, "serialized config contains NUL"),
        }
    })
}

/// Sets the output directory.
///
/// # Safety
/// `cfg` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kato_config_set_output(cfg: *mut KatoConfig, dir: *const c_char) -> KatoStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(KatoStatus::InvalidArgument, "config is null");
        };
        cfg.inner.output = PathBuf::from(tri!(str_arg(dir, "dir")));
        KatoStatus::Ok
    })
}

/// Sets the worker count (0 = all cores); the environment override still wins.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_config_set_workers(cfg: *mut KatoConfig, workers: usize) -> KatoStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(KatoStatus::InvalidArgument, "config is null");
        };
        cfg.inner.workers = workers;
        KatoStatus::Ok
    })
}

/// Keep finished runs found in the output directory.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_config_set_resume(cfg: *mut KatoConfig, resume: bool) -> KatoStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(KatoStatus::InvalidArgument, "config is null");
        };
        cfg.inner.resume = resume;
        KatoStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kato_config_free(cfg: *mut KatoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn report_status(r: &ExperimentReport) -> KatoStatus {
    if let Some(f) = r.failures.first() {
        return fail(
            KatoStatus::RunFailure,
            format!("{} run(s) failed; first at nu={}: {}", r.failures.len(), f.nu, f.message),
        );
    }
    if !r.flags.passed() {
        return fail(
            KatoStatus::AcceptanceFailure,
            format!("acceptance properties failed: {}", r.flags.failures().join(", ")),
        );
    }
    KatoStatus::Ok
}

unsafe fn finish_report(res: kato_lab::Result<ExperimentReport>, out: &mut *mut KatoReport) -> KatoStatus {
    match res {
        Ok(r) => {
            let status = report_status(&r);
            *out = Box::into_raw(Box::new(KatoReport { inner: r }));
            status
        }
        Err(e) => from_error(&e),
    }
}

/// Runs (or resumes) the ladder described by `cfg`.
///
/// The report is written to `out` whenever the ladder finished, including
/// when a run failed (`RunFailure`) or a property does not hold
/// (`AcceptanceFailure`).
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kato_run_ladder(cfg: *const KatoConfig, out: *mut *mut KatoReport) -> KatoStatus {
    guard(|| {
        let out = tri!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let Some(cfg) = cfg.as_ref() else {
            return fail(KatoStatus::InvalidArgument, "config is null");
        };
        finish_report(harness::run_ladder(&cfg.inner), out)
    })
}

/// Finishes an experiment directory using its stored configuration.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kato_resume(dir: *const c_char, out: *mut *mut KatoReport) -> KatoStatus {
    guard(|| {
        let out = tri!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let dir = tri!(str_arg(dir, "dir"));
        finish_report(harness::resume(dir.as_ref()), out)
    })
}

/// Re-verifies stored outputs. `violations` receives the number of
/// inconsistencies found; `AcceptanceFailure` is returned when there are any
/// or when a stored property fails.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `violations` may be null.
#[no_mangle]
pub unsafe extern "C" fn kato_check(dir: *const c_char, violations: *mut usize) -> KatoStatus {
    guard(|| {
        let dir = tri!(str_arg(dir, "dir"));
        let r: CheckReport = match harness::check(dir.as_ref()) {
            Ok(r) => r,
            Err(e) => return from_error(&e),
        };
        if let Some(v) = violations.as_mut() {
            *v = r.violations.len();
        }
        if !r.consistent() {
            return fail(KatoStatus::AcceptanceFailure, r.violations.join("\n"));
        }
        if !r.failures.is_empty() {
            return fail(KatoStatus::RunFailure, format!("{} failed run(s)", r.failures.len()));
        }
        if !r.passed() {
            let names = r.flags.map(|f| f.failures().join(", ")).unwrap_or_default();
            return fail(KatoStatus::AcceptanceFailure, format!("acceptance properties failed: {names}"));
        }
        KatoStatus::Ok
    })
}

/// Number of ladder rungs; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_report_len(report: *const KatoReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.rows.len())
}

/// Copies rung `index` (ordered from the largest viscosity) into `row`.
///
/// # Safety
/// `report` must be a live handle; `row` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kato_report_row(report: *const KatoReport, index: usize, row: *mut KatoLadderRow) -> KatoStatus {
    guard(|| {
        let row = tri!(out_arg(row, "row"));
        let Some(r) = report.as_ref() else {
            return fail(KatoStatus::InvalidArgument, "report is null");
        };
        let Some(x) = r.inner.rows.get(index) else {
            return fail(
                KatoStatus::InvalidArgument,
                format!("rung {index} out of range ({} rungs)", r.inner.rows.len()),
            );
        };
        *row = KatoLadderRow {
            nu: x.nu,
            kato_total: x.kato_total,
            global_total: x.global_total,
            balance_residual: x.balance_residual,
            term_i: x.term_i,
            term_ii: x.term_ii,
            term_iii: x.term_iii,
            l3_diff_to_next: x.next.map_or(f64::NAN, |m| m.l3_l3),
            linf_l2_diff_to_next: x.next.map_or(f64::NAN, |m| m.linf_l2),
        };
        KatoStatus::Ok
    })
}

/// Whether every run succeeded and every acceptance property holds.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_report_passed(report: *const KatoReport) -> bool {
    report
        .as_ref()
        .is_some_and(|r| r.inner.failures.is_empty() && r.inner.flags.passed())
}

/// Fitted log-log slope of the Kato-layer dissipation against `nu`; NaN when
/// the ladder is too short.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_report_kato_slope(report: *const KatoReport) -> f64 {
    report
        .as_ref()
        .and_then(|r| r.inner.trends.kato_slope)
        .unwrap_or(f64::NAN)
}

/// The full report as JSON (the same document as `report.json`).
///
/// # Safety
/// `report` must be a live handle; `out` must be valid for writes. Free the
/// result with [`kato_string_free`].
#[no_mangle]
pub unsafe extern "C" fn kato_report_to_json(report: *const KatoReport, out: *mut *mut c_char) -> KatoStatus {
    guard(|| {
        let out = tri!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let Some(r) = report.as_ref() else {
            return fail(KatoStatus::InvalidArgument, "report is null");
        };
        let json = match serde_json::to_string_pretty(&r.inner) {
            Ok(j) => j,
            Err(e) => return fail(KatoStatus::RunFailure, e.to_string()),
        };
        match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                KatoStatus::Ok
            }
            Err(_) => fail(KatoStatus::RunFailure, "report JSON contains NUL"),
        }
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kato_report_free(report: *mut KatoReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = kato_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn schedule_sizes_and_fills() {
        let mut len = 0;
        let s = unsafe { kato_beta_schedule(0.4, KatoLayerMode::Kato, 0.0, ptr::null_mut(), 0, &mut len) };
        assert_eq!(s, KatoStatus::InvalidArgument);
        assert_eq!(len, 3);
        let mut b = vec![0.0; len];
        let s = unsafe { kato_beta_schedule(0.4, KatoLayerMode::Kato, 0.0, b.as_mut_ptr(), b.len(), &mut len) };
        assert_eq!(s, KatoStatus::Ok);
        assert_eq!((b[0], b[2]), (0.0, 1.0));
    }

    #[test]
    fn rejected_layer_exponent_is_named() {
        assert_eq!(kato_validate_smooth_mode(0.75, 1.5, 5.0), KatoStatus::Ok);
        assert_eq!(kato_validate_smooth_mode(0.4, 7.0, f64::NAN), KatoStatus::ConfigError);
        assert!(last_error().contains("layer exponent a=7"));
        assert_eq!(kato_validate_smooth_mode(0.75, 1.5, 4.0), KatoStatus::ConfigError);
        assert!(last_error().contains("p=4"));
    }

    #[test]
    fn null_arguments_are_reported() {
        let mut out = ptr::null_mut();
        let s = unsafe { kato_config_from_toml(ptr::null(), &mut out) };
        assert_eq!(s, KatoStatus::InvalidArgument);
        assert!(out.is_null());
        assert_eq!(unsafe { kato_report_len(ptr::null()) }, 0);
        assert!(!unsafe { kato_report_passed(ptr::null()) });
    }

    #[test]
    fn panics_do_not_cross_the_boundary() {
        assert_eq!(guard(|| panic!("boom")), KatoStatus::Panic);
        assert_eq!(last_error(), "panic: boom");
    }
}
