//! C ABI over instance generation, plan verification and the complexity
//! checker.
//!
//! Every fallible call returns a [`TfStatus`]; on anything but `TF_OK` the
//! message is available from [`tf_last_error`] on the same thread. Handles
//! are opaque and must be released with their matching `_free` function.
//! Strings handed out by this library are released with [`tf_string_free`].

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tampforge::complexity::{analyze_python, Classification};
use tampforge::envs::generate_instance;
use tampforge::model::{DifficultyParams, EnvKind, FailureReason, TaskInstance, Verdict, DIFFICULTY_BUCKETS};
use tampforge::prompt::render_prompt;
use tampforge::sandbox::SandboxResult;
use tampforge::verifier::{verify, VerificationConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    TF_OK = 0,
    TF_NULL_POINTER = 1,
    TF_INVALID_UTF8 = 2,
    TF_INVALID_ARGUMENT = 3,
    TF_PARSE_ERROR = 4,
    TF_GENERATION_FAILED = 5,
    TF_PANIC = 6,
}

/// Mirrors the verifier's failure reasons, in priority order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfFailureReason {
    TF_EXEC_TIMEOUT = 0,
    TF_PARSE_FAILURE = 1,
    TF_ILLEGAL_ACTION = 2,
    TF_VELOCITY_VIOLATION = 3,
    TF_TIME_LIMIT_VIOLATION = 4,
    TF_COLLISION_VIOLATION = 5,
    TF_SAFE_DISTANCE_VIOLATION = 6,
    TF_ORDER_VIOLATION = 7,
    TF_GOAL_NOT_REACHED = 8,
    TF_NONE = 9,
}

impl From<FailureReason> for TfFailureReason {
    fn from(r: FailureReason) -> Self {
        match r {
            FailureReason::ExecTimeout => TfFailureReason::TF_EXEC_TIMEOUT,
            FailureReason::ParseError => TfFailureReason::TF_PARSE_FAILURE,
            FailureReason::IllegalAction => TfFailureReason::TF_ILLEGAL_ACTION,
            FailureReason::VelocityViolation => TfFailureReason::TF_VELOCITY_VIOLATION,
            FailureReason::TimeLimitViolation => TfFailureReason::TF_TIME_LIMIT_VIOLATION,
            FailureReason::CollisionViolation => TfFailureReason::TF_COLLISION_VIOLATION,
            FailureReason::SafeDistanceViolation => TfFailureReason::TF_SAFE_DISTANCE_VIOLATION,
            FailureReason::OrderViolation => TfFailureReason::TF_ORDER_VIOLATION,
            FailureReason::GoalNotReached => TfFailureReason::TF_GOAL_NOT_REACHED,
            FailureReason::None => TfFailureReason::TF_NONE,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfClassification {
    TF_TRIVIAL = 0,
    TF_MODERATE = 1,
    TF_SYMBOLIC = 2,
}

impl From<Classification> for TfClassification {
    fn from(c: Classification) -> Self {
        match c {
            Classification::Trivial => TfClassification::TF_TRIVIAL,
            Classification::Moderate => TfClassification::TF_MODERATE,
            Classification::Symbolic => TfClassification::TF_SYMBOLIC,
        }
    }
}

/// A generated or loaded task instance.
pub struct TfInstance(TaskInstance);

/// The verifier's judgement of one program output.
pub struct TfVerdict(Verdict);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(TfStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: TfStatus, msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, records any error, and turns panics into `TF_PANIC`.
fn guard(f: impl FnOnce() -> Outcome<()>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TfStatus::TF_OK
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TfStatus::TF_PANIC
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return fail(TfStatus::TF_NULL_POINTER, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(TfStatus::TF_INVALID_UTF8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().map_or_else(|| fail(TfStatus::TF_NULL_POINTER, format!("{what} is null")), Ok)
}

/// Writes `make()` through `out`; nothing is allocated when `out` is null.
unsafe fn put<T>(out: *mut T, make: impl FnOnce() -> T) -> Outcome<()> {
    if out.is_null() {
        return fail(TfStatus::TF_NULL_POINTER, "out is null");
    }
    out.write(make());
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Number of default difficulty buckets per environment.
#[no_mangle]
pub extern "C" fn tf_difficulty_buckets() -> u32 {
    DIFFICULTY_BUCKETS as u32
}

/// Generates an instance of `env` (e.g. "blocksworld") from a default
/// difficulty bucket.
///
/// # Safety
/// `env` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_generate(
    env: *const c_char,
    bucket: u32,
    seed: u64,
    out: *mut *mut TfInstance,
) -> TfStatus {
    guard(|| {
        let name = text(env, "env")?;
        let kind: EnvKind = match name.parse() {
            Ok(k) => k,
            Err(_) => return fail(TfStatus::TF_INVALID_ARGUMENT, format!("unknown environment `{name}`")),
        };
        if bucket as usize >= DIFFICULTY_BUCKETS {
            return fail(
                TfStatus::TF_INVALID_ARGUMENT,
                format!("bucket {bucket} out of range 0..{DIFFICULTY_BUCKETS}"),
            );
        }
        let d = DifficultyParams::bucket(kind, bucket as usize);
        let inst = generate_instance(kind, &d, seed).or_else(|e| fail(TfStatus::TF_GENERATION_FAILED, e.to_string()))?;
        put(out, || Box::into_raw(Box::new(TfInstance(inst))))
    })
}

/// Generates an instance from explicit difficulty parameters given as JSON.
///
/// # Safety
/// `difficulty_json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_generate_with(
    difficulty_json: *const c_char,
    seed: u64,
    out: *mut *mut TfInstance,
) -> TfStatus {
    guard(|| {
        let json = text(difficulty_json, "difficulty_json")?;
        let d: DifficultyParams =
            serde_json::from_str(json).or_else(|e| fail(TfStatus::TF_PARSE_ERROR, format!("difficulty: {e}")))?;
        let inst = generate_instance(d.env_kind(), &d, seed)
            .or_else(|e| fail(TfStatus::TF_GENERATION_FAILED, e.to_string()))?;
        put(out, || Box::into_raw(Box::new(TfInstance(inst))))
    })
}

/// Loads an instance from its JSON form.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_from_json(json: *const c_char, out: *mut *mut TfInstance) -> TfStatus {
    guard(|| {
        let json = text(json, "json")?;
        let inst = TaskInstance::from_json(json).or_else(|e| fail(TfStatus::TF_PARSE_ERROR, e.to_string()))?;
        put(out, || Box::into_raw(Box::new(TfInstance(inst))))
    })
}

/// Pretty JSON for an instance. Free the result with `tf_string_free`.
///
/// # Safety
/// `inst` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_to_json(inst: *const TfInstance, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        put(out, || owned_string(inst.0.to_json_pretty()))
    })
}

/// Prompt text a model sees for this instance. Free with
/// `tf_string_free`.
///
/// # Safety
/// `inst` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_description(inst: *const TfInstance, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        put(out, || owned_string(render_prompt(&inst.0)))
    })
}

/// # Safety
/// `inst` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn tf_instance_free(inst: *mut TfInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Judges `len` bytes of program output against `inst`, as if the program
/// exited cleanly within the time limit.
///
/// # Safety
/// `output` must point to `len` readable bytes (or be null with `len` 0);
/// `inst` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_verify(
    inst: *const TfInstance,
    output: *const u8,
    len: usize,
    out: *mut *mut TfVerdict,
) -> TfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let bytes: &[u8] = if len == 0 {
            &[]
        } else if output.is_null() {
            return fail(TfStatus::TF_NULL_POINTER, "output is null");
        } else {
            std::slice::from_raw_parts(output, len)
        };
        let run = SandboxResult::not_executed(String::from_utf8_lossy(bytes).into_owned());
        let v = verify(&inst.0, bytes, &run, &VerificationConfig::default());
        put(out, || Box::into_raw(Box::new(TfVerdict(v))))
    })
}

/// # Safety
/// `v` must be a live verdict handle or null.
#[no_mangle]
pub unsafe extern "C" fn tf_verdict_success(v: *const TfVerdict) -> bool {
    v.as_ref().is_some_and(|v| v.0.is_success())
}

/// Failure reason of a verdict; `TF_NONE` on success. A null handle reads
/// as `TF_PARSE_FAILURE`.
///
/// # Safety
/// `v` must be a live verdict handle or null.
#[no_mangle]
pub unsafe extern "C" fn tf_verdict_failure_reason(v: *const TfVerdict) -> TfFailureReason {
    v.as_ref()
        .map_or(TfFailureReason::TF_PARSE_FAILURE, |v| v.0.failure_reason().into())
}

/// Full verdict as JSON. Free with `tf_string_free`.
///
/// # Safety
/// `v` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_verdict_to_json(v: *const TfVerdict, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let v = handle(v, "verdict")?;
        let json = serde_json::to_string(&v.0).expect("verdicts serialize");
        put(out, || owned_string(json))
    })
}

/// # Safety
/// `v` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn tf_verdict_free(v: *mut TfVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Scores a Python program with the built-in pattern table. Either output
/// pointer may be null.
///
/// # Safety
/// `source` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn tf_complexity(
    source: *const c_char,
    score: *mut u32,
    class: *mut TfClassification,
) -> TfStatus {
    guard(|| {
        let src = text(source, "source")?;
        let r = analyze_python(src);
        if !score.is_null() {
            score.write(r.score);
        }
        if !class.is_null() {
            class.write(r.classification.into());
        }
        Ok(())
    })
}

/// Full complexity report for a Python program as JSON. Free with
/// `tf_string_free`.
///
/// # Safety
/// `source` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_complexity_json(source: *const c_char, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let src = text(source, "source")?;
        let json = serde_json::to_string(&analyze_python(src)).expect("reports serialize");
        put(out, || owned_string(json))
    })
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
