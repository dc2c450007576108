//! C interface to the solver: opaque handles, integer status codes,
//! and a thread-local error message.
//!
//! Conventions:
//! - every fallible call returns an [`EvolinStatus`]; on anything but
//!   `Ok` the message behind [`evolin_last_error_message`] describes
//!   the failure,
//! - handles are created behind out-pointers and released with the
//!   matching `*_free` call; freeing null is a no-op,
//! - pointers returned by accessors borrow from their handle and stay
//!   valid until that handle is freed,
//! - strings are UTF-8 and NUL terminated.

use evolin::error::Error;
use evolin::maxwell::{self, StepMethod};
use evolin::scenario::{load_scenario, Loaded, LoadedScenario};
use evolin::solver::{solve, Route, SolveOptions};
use evolin::Signal;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Outcome of a call, mirroring the CLI exit classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolinStatus {
    /// The call succeeded.
    Ok = 0,
    /// Misuse of the interface or an internal failure.
    Error = 1,
    /// The scenario document does not match the schema.
    Schema = 2,
    /// The scenario violates a structural hypothesis the solvers need.
    Hypothesis = 3,
    /// An iteration failed to reach its tolerance.
    Convergence = 4,
}

/// Which solver runs. The two routes are independent implementations
/// and agree within tolerance on well-posed scenarios; running both is
/// the cheapest cross-check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolinRoute {
    /// Regularization schedule with a vanishing smoothing parameter
    /// (resolvent splitting for field scenarios).
    Schedule = 0,
    /// Causal per-step solver (semismooth Newton for field scenarios).
    Stepper = 1,
}

/// What a scenario document describes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolinKind {
    /// A scalar evolution problem.
    Generic = 0,
    /// A two-dimensional eddy-current field problem.
    Maxwell = 1,
}

/// A parsed scenario. Opaque; create with [`evolin_scenario_load`],
/// release with [`evolin_scenario_free`].
pub struct EvolinScenario {
    loaded: Loaded,
    name: CString,
}

/// A solved trajectory plus its diagnostics. Opaque; create with
/// [`evolin_solve`], release with [`evolin_solution_free`].
///
/// The trajectory is row-major: `dim` values per time sample. Generic
/// scenarios store the state vector; field scenarios store the edge
/// field, then the cell field, then the flux.
pub struct EvolinSolution {
    times: Vec<f64>,
    data: Vec<f64>,
    dim: usize,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("NUL bytes removed");
    });
}

fn status_of(err: &Error) -> EvolinStatus {
    match err.exit_code() {
        2 => EvolinStatus::Schema,
        3 => EvolinStatus::Hypothesis,
        4 => EvolinStatus::Convergence,
        _ => EvolinStatus::Error,
    }
}

fn fail(err: &Error) -> EvolinStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Runs a closure with panics converted to `Error` status so unwinding
/// never crosses the C boundary.
fn guarded(body: impl FnOnce() -> EvolinStatus) -> EvolinStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic; this is a bug in the library");
            EvolinStatus::Error
        }
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn evolin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or an empty
/// string. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn evolin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses a scenario document and stores a handle in `out`.
///
/// # Safety
/// `json` must point to a NUL-terminated string, `out` to writable
/// storage for one pointer. On failure `out` is set to null.
#[no_mangle]
pub unsafe extern "C" fn evolin_scenario_load(
    json: *const c_char,
    out: *mut *mut EvolinScenario,
) -> EvolinStatus {
    if out.is_null() {
        set_error("null pointer for `out`");
        return EvolinStatus::Error;
    }
    unsafe { *out = ptr::null_mut() };
    if json.is_null() {
        set_error("null pointer for `json`");
        return EvolinStatus::Error;
    }
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t.to_owned(),
        Err(_) => {
            set_error("scenario text is not valid UTF-8");
            return EvolinStatus::Schema;
        }
    };
    guarded(|| match load_scenario(&text) {
        Ok(loaded) => {
            let name = CString::new(loaded.name.replace('\0', " ")).expect("NUL bytes removed");
            let handle = Box::new(EvolinScenario { loaded, name });
            unsafe { *out = Box::into_raw(handle) };
            EvolinStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Scenario kind. Null yields `Generic` with the error message set;
/// check [`evolin_last_error_message`] when passing untrusted handles.
///
/// # Safety
/// `scenario` must be null or a live handle from
/// [`evolin_scenario_load`].
#[no_mangle]
pub unsafe extern "C" fn evolin_scenario_kind(scenario: *const EvolinScenario) -> EvolinKind {
    let Some(s) = (unsafe { scenario.as_ref() }) else {
        set_error("null pointer for `scenario`");
        return EvolinKind::Generic;
    };
    match s.loaded.body {
        LoadedScenario::Generic(_) => EvolinKind::Generic,
        LoadedScenario::Maxwell(_) => EvolinKind::Maxwell,
    }
}

/// Scenario name (the `name` field, or the kind when absent). Borrows
/// from the handle; null in, null out.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evolin_scenario_name(scenario: *const EvolinScenario) -> *const c_char {
    match unsafe { scenario.as_ref() } {
        Some(s) => s.name.as_ptr(),
        None => ptr::null(),
    }
}

/// Releases a scenario handle. Null is a no-op.
///
/// # Safety
/// `scenario` must be null or a live handle; the handle is dead
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn evolin_scenario_free(scenario: *mut EvolinScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

fn flatten(blocks: &[&Signal]) -> (Vec<f64>, Vec<f64>, usize) {
    let grid = blocks[0].grid();
    let dim: usize = blocks.iter().map(|s| s.dim()).sum();
    let times: Vec<f64> = (0..grid.len()).map(|k| grid.time(k)).collect();
    let mut data = Vec::with_capacity(times.len() * dim);
    for k in 0..times.len() {
        for block in blocks {
            data.extend_from_slice(block.sample(k));
        }
    }
    (times, data, dim)
}

fn run_scenario(
    scenario: &EvolinScenario,
    route: EvolinRoute,
    tol: f64,
    seed: u64,
) -> Result<EvolinSolution, Error> {
    match &scenario.loaded.body {
        LoadedScenario::Generic(problem) => {
            let r = match route {
                EvolinRoute::Schedule => Route::YosidaGlobal,
                EvolinRoute::Stepper => Route::Timestep,
            };
            let opts = SolveOptions { tol, seed, ..SolveOptions::default() };
            let report = solve(problem, r, &opts)?;
            let (times, data, dim) = flatten(&[&report.u]);
            let json = serde_json::json!({
                "kind": "generic",
                "c_est": report.c_est,
                "delta": report.delta,
                "outer_iters": report.outer_iters,
                "residual_final": report.residual_final,
                "max_step_residual": report.max_step_residual,
                "solution_norm": report.u.weighted_norm(problem.weight()),
            });
            Ok(EvolinSolution {
                times,
                data,
                dim,
                report: CString::new(json.to_string()).expect("JSON has no NUL bytes"),
            })
        }
        LoadedScenario::Maxwell(problem) => {
            let method = match route {
                EvolinRoute::Schedule => StepMethod::ResolventSplitting,
                EvolinRoute::Stepper => StepMethod::Newton,
            };
            let run = maxwell::run(problem, method, tol)?;
            let (times, data, dim) = flatten(&[&run.e, &run.h, &run.b]);
            let d = run.diagnostics;
            let json = serde_json::json!({
                "kind": "maxwell",
                "max_inner_iters": d.max_inner_iters,
                "flux_mean_drift": d.div_drift,
                "harmonic_flux_max": d.harmonic_b_max,
                "power_balance_defect": d.energy_imbalance,
                "constitutive_defect": d.constitutive_defect,
                "removed_initial_flux_norm": d.removed_b0_norm,
            });
            Ok(EvolinSolution {
                times,
                data,
                dim,
                report: CString::new(json.to_string()).expect("JSON has no NUL bytes"),
            })
        }
    }
}

/// Solves the scenario on one route and stores a solution handle in
/// `out`. `tol` is the relative tolerance, `seed` drives every sampled
/// estimate; equal inputs give bit-identical solutions.
///
/// # Safety
/// `scenario` must be a live handle, `out` writable storage for one
/// pointer. On failure `out` is set to null.
#[no_mangle]
pub unsafe extern "C" fn evolin_solve(
    scenario: *const EvolinScenario,
    route: EvolinRoute,
    tol: f64,
    seed: u64,
    out: *mut *mut EvolinSolution,
) -> EvolinStatus {
    if out.is_null() {
        set_error("null pointer for `out`");
        return EvolinStatus::Error;
    }
    unsafe { *out = ptr::null_mut() };
    let Some(s) = (unsafe { scenario.as_ref() }) else {
        set_error("null pointer for `scenario`");
        return EvolinStatus::Error;
    };
    guarded(|| match run_scenario(s, route, tol, seed) {
        Ok(solution) => {
            unsafe { *out = Box::into_raw(Box::new(solution)) };
            EvolinStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Number of time samples; 0 for null.
///
/// # Safety
/// `solution` must be null or a live handle from [`evolin_solve`].
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_len(solution: *const EvolinSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.times.len())
}

/// Values per time sample; 0 for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_dim(solution: *const EvolinSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.dim)
}

/// Pointer to the `len` sample times. Borrows from the handle; null
/// in, null out.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_times(solution: *const EvolinSolution) -> *const f64 {
    unsafe { solution.as_ref() }.map_or(ptr::null(), |s| s.times.as_ptr())
}

/// Pointer to the `len * dim` trajectory values, row-major by time
/// sample. Borrows from the handle; null in, null out.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_data(solution: *const EvolinSolution) -> *const f64 {
    unsafe { solution.as_ref() }.map_or(ptr::null(), |s| s.data.as_ptr())
}

/// Solver diagnostics as a JSON object. Borrows from the handle; null
/// in, null out.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_report_json(
    solution: *const EvolinSolution,
) -> *const c_char {
    unsafe { solution.as_ref() }.map_or(ptr::null(), |s| s.report.as_ptr())
}

/// Releases a solution handle. Null is a no-op.
///
/// # Safety
/// `solution` must be null or a live handle; the handle is dead
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn evolin_solution_free(solution: *mut EvolinSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}
