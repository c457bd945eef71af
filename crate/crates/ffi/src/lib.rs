//! C ABI over `skdv-core`.
//!
//! Every fallible call returns an [`SkdvStatus`]; on failure the message is kept per thread
//! and read back with [`skdv_last_error`]. Handles are opaque and owned by the caller until
//! passed to the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use skdv_core::harness::{self, ExperimentConfig};
use skdv_core::spectral::{self, ComplexField, Grid1D, RealField};
use skdv_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkdvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    BlowUp = 4,
    Accuracy = 5,
    Config = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

/// Periodic grid.
pub struct SkdvGrid(Grid1D);

/// Validated experiment configuration.
pub struct SkdvExperiment(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> SkdvStatus {
    match e {
        Error::InvalidArgument(_) => SkdvStatus::InvalidArgument,
        Error::Precondition(_) => SkdvStatus::Precondition,
        Error::Internal(_) => SkdvStatus::Internal,
        Error::BlowUp { .. } => SkdvStatus::BlowUp,
        Error::Accuracy(_) => SkdvStatus::Accuracy,
        Error::Config(_) | Error::Json(_) => SkdvStatus::Config,
        Error::Io(_) => SkdvStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SkdvStatus, String)>) -> SkdvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SkdvStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside skdv");
            SkdvStatus::Panic
        }
    }
}

fn core(e: Error) -> (SkdvStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SkdvStatus, String) {
    (SkdvStatus::NullPointer, format!("{name} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SkdvStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SkdvStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next `skdv_*` call on the same thread.
#[no_mangle]
pub extern "C" fn skdv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn skdv_grid_new(length: f64, points: usize, out: *mut *mut SkdvGrid) -> SkdvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Grid1D::new(length, points).map_err(core)?;
        *out = Box::into_raw(Box::new(SkdvGrid(grid)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`skdv_grid_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn skdv_grid_free(grid: *mut SkdvGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn skdv_grid_points(grid: *const SkdvGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.points())
}

/// Applies `S(t)` in place to the complex field stored as separate real and imaginary arrays.
///
/// # Safety
/// `re` and `im` must each point to `len` writable doubles; `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn skdv_schrodinger_propagate(
    grid: *const SkdvGrid,
    t: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SkdvStatus {
    guard(|| {
        let grid = grid.as_ref().ok_or_else(|| null("grid"))?;
        if re.is_null() || im.is_null() {
            return Err(null("field"));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        let values = re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let field = ComplexField::new(&grid.0, values).map_err(core)?;
        let moved = spectral::schrodinger_propagate(&field, t).map_err(core)?;
        for ((a, b), z) in re.iter_mut().zip(im.iter_mut()).zip(moved.values()) {
            *a = z.re;
            *b = z.im;
        }
        Ok(())
    })
}

/// Applies `U(t)` in place to a real field.
///
/// # Safety
/// `values` must point to `len` writable doubles; `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn skdv_airy_propagate(
    grid: *const SkdvGrid,
    t: f64,
    values: *mut f64,
    len: usize,
) -> SkdvStatus {
    guard(|| {
        let grid = grid.as_ref().ok_or_else(|| null("grid"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        let values = std::slice::from_raw_parts_mut(values, len);
        let field = RealField::new(&grid.0, values.to_vec()).map_err(core)?;
        let moved = spectral::airy_propagate(&field, t).map_err(core)?;
        values.copy_from_slice(moved.values());
        Ok(())
    })
}

/// Parses and validates a JSON configuration; unknown keys are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn skdv_experiment_from_json(json: *const c_char, out: *mut *mut SkdvExperiment) -> SkdvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_json(c_str(json, "json")?).map_err(core)?;
        *out = Box::into_raw(Box::new(SkdvExperiment(cfg)));
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn skdv_experiment_set_seed(exp: *mut SkdvExperiment, seed: u64) -> SkdvStatus {
    guard(|| {
        exp.as_mut().ok_or_else(|| null("experiment"))?.0.seed = seed;
        Ok(())
    })
}

/// Runs the configured scenario, writing its files under `out_dir`. `passed` receives
/// whether every verdict passed; a failed verdict is not an error status.
///
/// # Safety
/// `exp` must be a live handle, `out_dir` a NUL-terminated path and `passed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn skdv_experiment_run(
    exp: *const SkdvExperiment,
    out_dir: *const c_char,
    passed: *mut bool,
) -> SkdvStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let dir = c_str(out_dir, "out_dir")?;
        let summary = harness::run(&exp.0, Path::new(dir)).map_err(core)?;
        if !passed.is_null() {
            *passed = summary.passed();
        }
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle from [`skdv_experiment_from_json`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn skdv_experiment_free(exp: *mut SkdvExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}
