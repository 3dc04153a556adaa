//! C ABI for the tmkit modeling toolkit.
//!
//! Conventions, which every function below follows:
//!
//! * Handles (`TmkBundle`, `TmkRun`) are opaque. They are created by the
//!   `tmk_*_parse` / `tmk_run_script` constructors, are never shared between
//!   calls mutably, and must be released with their matching `tmk_*_free`.
//! * Returned strings are NUL-terminated, UTF-8, owned by the caller, and
//!   must be released with [`tmk_string_free`]. String-returning functions
//!   yield a null pointer on failure.
//! * Fallible functions return a [`TmkStatus`]. Anything other than
//!   `Ok`/`Violations` stores a message retrievable with [`tmk_last_error`].
//! * Passing a null pointer where a value is required fails with
//!   `InvalidArgument`; it never crashes. Free functions accept null.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use tmkit::constraints::evaluate;
use tmkit::diag::Diagnostic;
use tmkit::dsl::{load_model, parse_script};
use tmkit::engine::{run_script, RunOutcome};
use tmkit::io::dot::{behavior_dot, events_dot, static_dot};
use tmkit::io::{
    bundle_from_json, bundle_to_json, report_text, trace_from_json, trace_text,
    trace_to_json,
};
use tmkit::model::{validate_bundle, Bundle};

/// Outcome of a call into the toolkit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmkStatus {
    /// The call succeeded.
    Ok = 0,
    /// Evaluation ran to completion and found constraint violations.
    Violations = 1,
    /// Model or script text could not be parsed or failed validation.
    ParseError = 2,
    /// A script statement failed at run time.
    RuntimeError = 3,
    /// A required argument was null, malformed, or out of range.
    InvalidArgument = 4,
    /// A JSON document could not be decoded.
    DecodeError = 5,
}

/// A validated model bundle: the static model plus its event, behavior,
/// and constraint declarations.
pub struct TmkBundle {
    bundle: Bundle,
    warnings: Vec<Diagnostic>,
}

/// A finished script run: the timed trace, emitted messages, and the error
/// that stopped the run early, if any.
pub struct TmkRun {
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs stripped");
    });
}

fn diagnostics_text(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Converts an owned string into a caller-owned C string.
fn give_string(s: String) -> *mut c_char {
    let sanitized = if s.contains('\0') { s.replace('\0', " ") } else { s };
    CString::new(sanitized).expect("NULs stripped").into_raw()
}

/// Reads a required UTF-8 argument; records the failure on `None`.
unsafe fn want_str<'a>(ptr: *const c_char, what: &str) -> Option<&'a str> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return None;
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Some(s),
        Err(_) => {
            set_error(&format!("{what} is not valid UTF-8"));
            None
        }
    }
}

unsafe fn want_ref<'a, T>(ptr: *const T, what: &str) -> Option<&'a T> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        None
    } else {
        Some(&*ptr)
    }
}

/// Runs a fallible body, converting a library panic into `RuntimeError`
/// instead of unwinding across the ABI boundary.
fn guarded(body: impl FnOnce() -> TmkStatus) -> TmkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal error: the operation panicked");
            TmkStatus::RuntimeError
        }
    }
}

/// Returns the message recorded by the most recent failing call on this
/// thread, or an empty string if none has failed yet. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn tmk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tmk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

/// Parses and validates model text. On success writes a new handle to
/// `out_bundle` and returns `Ok`; on failure returns `ParseError` and
/// leaves `out_bundle` untouched.
#[no_mangle]
pub unsafe extern "C" fn tmk_bundle_parse(
    source: *const c_char,
    out_bundle: *mut *mut TmkBundle,
) -> TmkStatus {
    guarded(|| {
        let (Some(source), Some(_)) = (
            want_str(source, "source"),
            want_ref(out_bundle, "out_bundle"),
        ) else {
            return TmkStatus::InvalidArgument;
        };
        match load_model(source) {
            Ok(output) => {
                let handle = Box::new(TmkBundle {
                    bundle: output.bundle,
                    warnings: output.warnings,
                });
                *out_bundle = Box::into_raw(handle);
                TmkStatus::Ok
            }
            Err(diags) => {
                set_error(&diagnostics_text(&diags));
                TmkStatus::ParseError
            }
        }
    })
}

/// Decodes a bundle from its JSON form and validates it. On success writes
/// a new handle to `out_bundle`; malformed JSON or a bundle that fails
/// validation yields `DecodeError`.
#[no_mangle]
pub unsafe extern "C" fn tmk_bundle_from_json(
    json: *const c_char,
    out_bundle: *mut *mut TmkBundle,
) -> TmkStatus {
    guarded(|| {
        let (Some(json), Some(_)) =
            (want_str(json, "json"), want_ref(out_bundle, "out_bundle"))
        else {
            return TmkStatus::InvalidArgument;
        };
        let bundle = match bundle_from_json(json) {
            Ok(bundle) => bundle,
            Err(err) => {
                set_error(&err.to_string());
                return TmkStatus::DecodeError;
            }
        };
        let diags = validate_bundle(&bundle);
        if tmkit::diag::has_errors(&diags) {
            set_error(&diagnostics_text(&diags));
            return TmkStatus::DecodeError;
        }
        *out_bundle = Box::into_raw(Box::new(TmkBundle { bundle, warnings: diags }));
        TmkStatus::Ok
    })
}

/// Serializes the bundle to its JSON form.
#[no_mangle]
pub unsafe extern "C" fn tmk_bundle_to_json(bundle: *const TmkBundle) -> *mut c_char {
    match want_ref(bundle, "bundle") {
        Some(handle) => give_string(bundle_to_json(&handle.bundle)),
        None => std::ptr::null_mut(),
    }
}

/// Returns the validation warnings for the bundle, one per line; the string
/// is empty when the model is warning-free.
#[no_mangle]
pub unsafe extern "C" fn tmk_bundle_warnings(bundle: *const TmkBundle) -> *mut c_char {
    match want_ref(bundle, "bundle") {
        Some(handle) => give_string(diagnostics_text(&handle.warnings)),
        None => std::ptr::null_mut(),
    }
}

/// Releases a bundle handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tmk_bundle_free(bundle: *mut TmkBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

/// Parses script text and interprets it against the bundle. On `Ok` the
/// run completed; on `RuntimeError` a statement failed, and a run handle
/// holding everything up to the failure is still written to `out_run` (the
/// failure itself is in [`tmk_run_error`] and [`tmk_last_error`]). On
/// `ParseError` no handle is written.
#[no_mangle]
pub unsafe extern "C" fn tmk_run_script(
    bundle: *const TmkBundle,
    source: *const c_char,
    out_run: *mut *mut TmkRun,
) -> TmkStatus {
    guarded(|| {
        let (Some(handle), Some(source), Some(_)) = (
            want_ref(bundle, "bundle"),
            want_str(source, "source"),
            want_ref(out_run, "out_run"),
        ) else {
            return TmkStatus::InvalidArgument;
        };
        let script = match parse_script(source) {
            Ok(script) => script,
            Err(diags) => {
                set_error(&diagnostics_text(&diags));
                return TmkStatus::ParseError;
            }
        };
        let outcome = run_script(&handle.bundle, &script);
        let failed = outcome.error.as_ref().map(ToString::to_string);
        *out_run = Box::into_raw(Box::new(TmkRun { outcome }));
        match failed {
            None => TmkStatus::Ok,
            Some(message) => {
                set_error(&message);
                TmkStatus::RuntimeError
            }
        }
    })
}

/// Returns the error that stopped the run, or an empty string for a clean
/// run.
#[no_mangle]
pub unsafe extern "C" fn tmk_run_error(run: *const TmkRun) -> *mut c_char {
    match want_ref(run, "run") {
        Some(handle) => give_string(
            handle.outcome.error.as_ref().map(ToString::to_string).unwrap_or_default(),
        ),
        None => std::ptr::null_mut(),
    }
}

/// Returns the messages the run emitted, one per line, in order; the string
/// is empty when the run emitted none.
#[no_mangle]
pub unsafe extern "C" fn tmk_run_messages(run: *const TmkRun) -> *mut c_char {
    match want_ref(run, "run") {
        Some(handle) => {
            let lines: Vec<&str> = handle
                .outcome
                .trace
                .messages
                .iter()
                .map(|(_, text)| text.as_str())
                .collect();
            give_string(lines.join("\n"))
        }
        None => std::ptr::null_mut(),
    }
}

/// Renders the run's trace as plain text: one `t=<step> <event>(<binding>)`
/// line per occurrence, then one `t=<step> msg "<text>"` line per message.
#[no_mangle]
pub unsafe extern "C" fn tmk_run_trace_text(run: *const TmkRun) -> *mut c_char {
    match want_ref(run, "run") {
        Some(handle) => give_string(trace_text(&handle.outcome.trace)),
        None => std::ptr::null_mut(),
    }
}

/// Serializes the run's trace to JSON, suitable for later evaluation with
/// [`tmk_evaluate_trace_json`].
#[no_mangle]
pub unsafe extern "C" fn tmk_run_trace_json(run: *const TmkRun) -> *mut c_char {
    match want_ref(run, "run") {
        Some(handle) => give_string(trace_to_json(&handle.outcome.trace)),
        None => std::ptr::null_mut(),
    }
}

/// Releases a run handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tmk_run_free(run: *mut TmkRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

// ---------------------------------------------------------------------------
// Evaluation and export
// ---------------------------------------------------------------------------

fn evaluate_to_report(
    bundle: &Bundle,
    trace: &tmkit::engine::Trace,
    out_report: *mut *mut c_char,
) -> TmkStatus {
    match evaluate(bundle, trace) {
        Ok(report) => {
            if !out_report.is_null() {
                unsafe { *out_report = give_string(report_text(&report)) };
            }
            if report.conforming {
                TmkStatus::Ok
            } else {
                TmkStatus::Violations
            }
        }
        Err(err) => {
            set_error(&err.to_string());
            TmkStatus::InvalidArgument
        }
    }
}

/// Checks the run's trace against every constraint the bundle declares,
/// including its behavior model. Returns `Ok` when the trace conforms and
/// `Violations` when it does not; either way, when `out_report` is
/// non-null it receives the full report text.
#[no_mangle]
pub unsafe extern "C" fn tmk_evaluate(
    bundle: *const TmkBundle,
    run: *const TmkRun,
    out_report: *mut *mut c_char,
) -> TmkStatus {
    guarded(|| {
        let (Some(handle), Some(run)) =
            (want_ref(bundle, "bundle"), want_ref(run, "run"))
        else {
            return TmkStatus::InvalidArgument;
        };
        evaluate_to_report(&handle.bundle, &run.outcome.trace, out_report)
    })
}

/// Like [`tmk_evaluate`], but for a trace decoded from JSON, so traces
/// recorded elsewhere can be checked against the model's constraints.
#[no_mangle]
pub unsafe extern "C" fn tmk_evaluate_trace_json(
    bundle: *const TmkBundle,
    trace_json: *const c_char,
    out_report: *mut *mut c_char,
) -> TmkStatus {
    guarded(|| {
        let (Some(handle), Some(json)) =
            (want_ref(bundle, "bundle"), want_str(trace_json, "trace_json"))
        else {
            return TmkStatus::InvalidArgument;
        };
        let trace = match trace_from_json(json) {
            Ok(trace) => trace,
            Err(err) => {
                set_error(&err.to_string());
                return TmkStatus::DecodeError;
            }
        };
        evaluate_to_report(&handle.bundle, &trace, out_report)
    })
}

/// Renders one view of the bundle as Graphviz DOT. `view` selects what to
/// draw: `"static"` (thimacs, stages, and arcs), `"events"` (one cluster
/// per declared event around a copy of its region), or `"behavior"` (the
/// chronology graph). On `Ok`, `out_text` receives the DOT document.
#[no_mangle]
pub unsafe extern "C" fn tmk_export_dot(
    bundle: *const TmkBundle,
    view: *const c_char,
    out_text: *mut *mut c_char,
) -> TmkStatus {
    guarded(|| {
        let (Some(handle), Some(view), Some(_)) = (
            want_ref(bundle, "bundle"),
            want_str(view, "view"),
            want_ref(out_text, "out_text"),
        ) else {
            return TmkStatus::InvalidArgument;
        };
        let text = match view {
            "static" => static_dot(&handle.bundle.model),
            "events" => events_dot(&handle.bundle),
            "behavior" => behavior_dot(&handle.bundle),
            other => {
                set_error(&format!(
                    "unknown view `{other}`; expected static, events, or behavior"
                ));
                return TmkStatus::InvalidArgument;
            }
        };
        *out_text = give_string(text);
        TmkStatus::Ok
    })
}
