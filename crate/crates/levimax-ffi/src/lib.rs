//! C ABI for the levimax library.
//!
//! All functions follow the same conventions:
//!
//! * objects cross the boundary as opaque pointers and must be released
//!   with the matching `*_free` function;
//! * every fallible call returns a [`LevimaxStatus`]; on failure a
//!   human-readable message is stored in thread-local storage and can be
//!   retrieved with [`levimax_last_error`];
//! * strings are NUL-terminated UTF-8; strings returned by the library
//!   must be released with [`levimax_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use levimax::field::ScalarField;
use levimax::regmax::{RegMax, ThetaVector};
use levimax::scenario::Scenario;
use levimax::verify::{verify_estimate, verify_hessian_bound};
use levimax::Error;

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LevimaxStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An expression or scenario failed to parse or validate.
    Parse = 3,
    /// Arguments were outside the function's domain (dimension
    /// mismatches, non-positive widths, and similar).
    Domain = 4,
    /// An iterative solver failed to converge.
    Solver = 5,
    /// A theorem hypothesis does not hold, so the requested check is
    /// inapplicable to the input.
    Hypothesis = 6,
    /// The library panicked; this indicates a bug.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> LevimaxStatus {
    match err {
        Error::Syntax { .. } | Error::Scenario(_) | Error::Json(_) => LevimaxStatus::Parse,
        Error::HypothesisViolated(_) => LevimaxStatus::Hypothesis,
        Error::DiscNonConvergence { .. } => LevimaxStatus::Solver,
        _ => LevimaxStatus::Domain,
    }
}

fn fail(err: &Error) -> LevimaxStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> LevimaxStatus>(f: F) -> LevimaxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            LevimaxStatus::Internal
        }
    }
}

/// Message describing the most recent failure on this thread, or null if
/// no failure has been recorded. The pointer stays valid until the next
/// failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn levimax_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

/// Opaque handle to a parsed scalar field on R^{2n}.
pub struct LevimaxField {
    inner: ScalarField,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, LevimaxStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(LevimaxStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        LevimaxStatus::InvalidUtf8
    })
}

/// Parse `source` as a scalar field in the variables `x1..x_{2n}` and
/// store a handle in `out`.
///
/// # Safety
///
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn levimax_field_parse(
    source: *const c_char,
    n: usize,
    out: *mut *mut LevimaxField,
) -> LevimaxStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return LevimaxStatus::NullPointer;
        }
        let source = match read_str(source) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ScalarField::parse(source, n) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(LevimaxField { inner }));
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate the field at `point` (an array of `len` reals) into `out`.
///
/// # Safety
///
/// `field`, `point` (with `len` readable elements) and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn levimax_field_eval(
    field: *const LevimaxField,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> LevimaxStatus {
    guard(|| {
        if field.is_null() || point.is_null() || out.is_null() {
            set_error("null argument");
            return LevimaxStatus::NullPointer;
        }
        let point = std::slice::from_raw_parts(point, len);
        match (*field).inner.eval(point) {
            Ok(value) => {
                *out = value;
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate the gradient of the field at `point` into `out` (also `len`
/// elements).
///
/// # Safety
///
/// `field`, `point` and `out` must be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn levimax_field_gradient(
    field: *const LevimaxField,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> LevimaxStatus {
    guard(|| {
        if field.is_null() || point.is_null() || out.is_null() {
            set_error("null argument");
            return LevimaxStatus::NullPointer;
        }
        let point = std::slice::from_raw_parts(point, len);
        match (*field).inner.gradient(point) {
            Ok(grad) => {
                if grad.len() != len {
                    set_error("gradient length does not match the point length");
                    return LevimaxStatus::Domain;
                }
                std::slice::from_raw_parts_mut(out, len).copy_from_slice(&grad);
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a field handle. Null is ignored.
///
/// # Safety
///
/// `field` must have come from [`levimax_field_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn levimax_field_free(field: *mut LevimaxField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Evaluate the regularized maximum of `t[0..k]` with widths
/// `theta[0..k]` into `out`.
///
/// # Safety
///
/// `t` and `theta` must be readable for `k` elements and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn levimax_regmax_eval(
    t: *const f64,
    theta: *const f64,
    k: usize,
    out: *mut f64,
) -> LevimaxStatus {
    guard(|| {
        if t.is_null() || theta.is_null() || out.is_null() {
            set_error("null argument");
            return LevimaxStatus::NullPointer;
        }
        let t = std::slice::from_raw_parts(t, k);
        let theta = std::slice::from_raw_parts(theta, k).to_vec();
        let theta = match ThetaVector::new(theta) {
            Ok(theta) => theta,
            Err(e) => return fail(&e),
        };
        match RegMax::new().eval(t, &theta) {
            Ok(value) => {
                *out = value;
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate the gradient of the regularized maximum into `out[0..k]`.
///
/// # Safety
///
/// `t`, `theta` and `out` must all be valid for `k` elements.
#[no_mangle]
pub unsafe extern "C" fn levimax_regmax_grad(
    t: *const f64,
    theta: *const f64,
    k: usize,
    out: *mut f64,
) -> LevimaxStatus {
    guard(|| {
        if t.is_null() || theta.is_null() || out.is_null() {
            set_error("null argument");
            return LevimaxStatus::NullPointer;
        }
        let t = std::slice::from_raw_parts(t, k);
        let theta = std::slice::from_raw_parts(theta, k).to_vec();
        let theta = match ThetaVector::new(theta) {
            Ok(theta) => theta,
            Err(e) => return fail(&e),
        };
        match RegMax::new().grad(t, &theta) {
            Ok(grad) => {
                std::slice::from_raw_parts_mut(out, k).copy_from_slice(&grad);
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Checks runnable through [`levimax_scenario_run`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LevimaxCheck {
    /// Sandwich estimate between two fields on the scenario grid.
    Estimate = 0,
    /// Hessian lower bound for the smoothed maximum on the grid.
    HessianBound = 1,
}

fn run_check(json: &str, check: LevimaxCheck) -> Result<String, Error> {
    let scenario = Scenario::from_json(json)?;
    let report = match check {
        LevimaxCheck::Estimate => {
            let fields = scenario.build_fields()?;
            if fields.len() < 2 {
                return Err(Error::Scenario("the estimate check needs two fields".into()));
            }
            let epsilon = scenario.epsilon.ok_or_else(|| {
                Error::Scenario("the estimate check needs `epsilon` in the scenario".into())
            })?;
            verify_estimate(
                &fields[0],
                &fields[1],
                epsilon,
                &scenario.build_grid(),
                scenario.tolerances.estimate,
                &scenario.name,
                scenario.seed,
            )?
        }
        LevimaxCheck::HessianBound => verify_hessian_bound(&scenario)?,
    };
    report.to_json()
}

/// Run a verification check on a scenario given as a JSON document and
/// store the JSON report in `out_report`. The report must be released
/// with [`levimax_string_free`]. A failing check still returns
/// `Ok`; inspect the `pass` flag inside the report.
///
/// # Safety
///
/// `scenario_json` must be a NUL-terminated string and `out_report` valid.
#[no_mangle]
pub unsafe extern "C" fn levimax_scenario_run(
    scenario_json: *const c_char,
    check: LevimaxCheck,
    out_report: *mut *mut c_char,
) -> LevimaxStatus {
    guard(|| {
        if out_report.is_null() {
            set_error("null output pointer");
            return LevimaxStatus::NullPointer;
        }
        let json = match read_str(scenario_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match run_check(json, check) {
            Ok(report) => {
                let report = CString::new(report.replace('\0', " ")).unwrap_or_default();
                *out_report = report.into_raw();
                LevimaxStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
///
/// `s` must have been returned by this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn levimax_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
