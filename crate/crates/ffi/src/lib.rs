//! C interface to the `mfg_lg` solver.
//!
//! Configs are parsed from the same `key = value` text the CLI reads, solved
//! into an opaque solution handle, and copied out level by level into
//! caller-owned buffers. Every fallible call returns an [`MfgStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`mfg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mfg_lg::cli::{self, CliError, RunConfig};
use mfg_lg::MfgSolution as Solution;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The config text is malformed or a value is out of range.
    Config = 3,
    /// The config parsed but the problem cannot be discretized.
    Setup = 4,
    /// The solver failed during the iteration.
    Solve = 5,
    /// Level index past the last time level.
    OutOfRange = 6,
    /// The destination buffer is too short.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed run configuration.
pub struct MfgConfig(RunConfig);

/// Result of a solve: density and value on every time level.
pub struct MfgSolution {
    solution: Solution,
    dt: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: MfgStatus, msg: impl Into<String>) -> MfgStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> MfgStatus) -> MfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MfgStatus::Panic, "internal panic"),
    }
}

fn cli_status(e: &CliError) -> MfgStatus {
    match e {
        CliError::Config(_) => MfgStatus::Config,
        CliError::Setup(_) => MfgStatus::Setup,
        CliError::Solve(_) | CliError::Write { .. } => MfgStatus::Solve,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mfg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses NUL-terminated config text into `*out`.
///
/// # Safety
/// `text` must be NULL or a valid C string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_parse(text: *const c_char, out: *mut *mut MfgConfig) -> MfgStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(MfgStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(MfgStatus::InvalidUtf8, "config text is not UTF-8");
        };
        match cli::parse_str(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(MfgConfig(cfg)));
                MfgStatus::Ok
            }
            Err(e) => fail(MfgStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from [`mfg_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_free(cfg: *mut MfgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Validates `cfg` without solving: grid, time step and mollifier.
///
/// # Safety
/// `cfg` must be NULL or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_check(cfg: *const MfgConfig) -> MfgStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(MfgStatus::NullPointer, "null config");
        };
        match cli::check(&cfg.0) {
            Ok(_) => MfgStatus::Ok,
            Err(e) => fail(cli_status(&e), e.to_string()),
        }
    })
}

/// Runs the fixed-point iteration for `cfg` (which must set `dx`). Running
/// out of iterations is not an error; see [`mfg_solution_converged`].
///
/// # Safety
/// `cfg` must be NULL or a live config handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mfg_solve(cfg: *const MfgConfig, out: *mut *mut MfgSolution) -> MfgStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(MfgStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        match cli::solve(&(*cfg).0, |_| {}) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(MfgSolution {
                    solution: s.solution,
                    dt: s.dt,
                }));
                MfgStatus::Ok
            }
            Err(e) => fail(cli_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `sol` must be NULL or a handle from [`mfg_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_free(sol: *mut MfgSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Space dimension; 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_dim(sol: *const MfgSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.density.grid.dim())
}

/// Number of grid nodes (cells); 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_cells(sol: *const MfgSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.density.grid.len())
}

/// Number of time levels, `N + 1`; 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_levels(sol: *const MfgSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.density.levels.len())
}

/// Effective time step; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_dt(sol: *const MfgSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.dt)
}

/// Final fixed-point residual; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_residual(sol: *const MfgSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.solution.residual)
}

/// Picard iterations performed; 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_iterations(sol: *const MfgSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.iterations)
}

/// 1 if the residual fell below the tolerance, 0 otherwise (or for NULL).
///
/// # Safety
/// `sol` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_converged(sol: *const MfgSolution) -> c_int {
    sol.as_ref().map_or(0, |s| s.solution.converged as c_int)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> MfgStatus {
    if buf.is_null() {
        return fail(MfgStatus::NullPointer, "null buffer");
    }
    if len < src.len() {
        return fail(
            MfgStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    MfgStatus::Ok
}

/// Node coordinates, `cells * dim` values, node-major.
///
/// # Safety
/// `sol` must be NULL or a live solution handle; `buf` must be NULL or
/// valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_nodes(sol: *const MfgSolution, buf: *mut f64, len: usize) -> MfgStatus {
    guard(|| {
        let Some(s) = sol.as_ref() else {
            return fail(MfgStatus::NullPointer, "null solution");
        };
        let grid = &s.solution.density.grid;
        let coords: Vec<f64> = (0..grid.len()).flat_map(|n| grid.node(n)).collect();
        copy_out(&coords, buf, len)
    })
}

#[derive(Clone, Copy)]
enum Field {
    Density,
    Value,
}

unsafe fn copy_level(sol: *const MfgSolution, field: Field, level: usize, buf: *mut f64, len: usize) -> MfgStatus {
    guard(|| {
        let Some(s) = sol.as_ref() else {
            return fail(MfgStatus::NullPointer, "null solution");
        };
        let levels = match field {
            Field::Density => &s.solution.density.levels,
            Field::Value => &s.solution.value.levels,
        };
        match levels.get(level) {
            Some(l) => copy_out(l, buf, len),
            None => fail(
                MfgStatus::OutOfRange,
                format!("level {level} out of range, solution has {}", levels.len()),
            ),
        }
    })
}

/// Density cell coefficients at time level `level`, `cells` values.
///
/// # Safety
/// As for [`mfg_solution_nodes`].
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_density(
    sol: *const MfgSolution,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> MfgStatus {
    copy_level(sol, Field::Density, level, buf, len)
}

/// Unmollified value at the nodes at time level `level`, `cells` values.
///
/// # Safety
/// As for [`mfg_solution_nodes`].
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_value(
    sol: *const MfgSolution,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> MfgStatus {
    copy_level(sol, Field::Value, level, buf, len)
}
