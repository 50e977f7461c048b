//! C interface to `simplenormal`.
//!
//! Every function returns an [`SnStatus`]; results come back through out
//! pointers. On failure the message is available from [`sn_last_error`]
//! until the next call on the same thread. Strings handed out by the library
//! are released with [`sn_string_free`], handles with their own `_free`.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use simplenormal::alphabet::{balanced_alphabet, AlphabetU};
use simplenormal::analyzer::verify_stage_log;
use simplenormal::engine::{parse_jsonl, run, to_jsonl, FinalPoint, StageRecord};
use simplenormal::profile::{validate_profile, NormalityProfile};
use simplenormal::residue::{euler_phi, haiman_difference, partition_count, PartitionSpec};
use simplenormal::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    InvalidArgument = 1,
    Profile = 2,
    TooLarge = 3,
    BudgetExhausted = 4,
    Parse = 5,
    Io = 6,
    Internal = 7,
    NullPointer = 8,
    Utf8 = 9,
    Panic = 10,
}

impl From<&Error> for SnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => SnStatus::InvalidArgument,
            Error::Profile(_) => SnStatus::Profile,
            Error::TooLarge(_) => SnStatus::TooLarge,
            Error::BudgetExhausted { .. } => SnStatus::BudgetExhausted,
            Error::Parse(_) | Error::Json(_) => SnStatus::Parse,
            Error::Io(_) => SnStatus::Io,
            Error::Internal(_) => SnStatus::Internal,
        }
    }
}

/// A validated normality profile.
pub struct SnProfile(NormalityProfile);

/// A digit alphabet built by [`sn_alphabet_new`].
pub struct SnAlphabet(AlphabetU);

/// A finished construction: the stage log and the final point.
pub struct SnConstruction {
    records: Vec<StageRecord>,
    last: FinalPoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(SnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(SnStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SnStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SnStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SnStatus::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(SnStatus::Internal, "string with interior nul".into()))?;
    write(out, c.into_raw(), "out")
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// owned by the library and stays valid until the next call.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Euler's totient of `n`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_euler_phi(n: u64, out: *mut u64) -> SnStatus {
    guard(|| write(out, euler_phi(n)?, "out"))
}

/// Signed subset-sum count behind the Haiman identity, as a decimal string.
///
/// # Safety
/// `out` must be valid for writes; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_haiman_difference(n: u64, k: u64, out: *mut *mut c_char) -> SnStatus {
    guard(|| write_string(out, haiman_difference(n, k)?.to_string()))
}

/// Number of ways to write `sigma` as `v` summands drawn from `{1..n-1}`,
/// each value available `k` times, as a decimal string.
///
/// # Safety
/// `out` must be valid for writes; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_partition_count(n: u64, sigma: u64, v: u64, k: u64, out: *mut *mut c_char) -> SnStatus {
    guard(|| write_string(out, partition_count(&PartitionSpec::new(n, sigma, v, k)?).to_string()))
}

/// Least `n` with `r^n >= e^b`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_nat_pos(b: u64, r: u64, out: *mut u64) -> SnStatus {
    guard(|| write(out, simplenormal::certified::nat_pos(b, r)?, "out"))
}

/// Parses and validates a profile given as JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_profile_parse(json: *const c_char, out: *mut *mut SnProfile) -> SnStatus {
    guard(|| {
        let profile = validate_profile(read_str(json, "json")?)?;
        write(out, Box::into_raw(Box::new(SnProfile(profile))), "out")
    })
}

/// Replaces the seed of a profile.
///
/// # Safety
/// `profile` must be a live handle from [`sn_profile_parse`].
#[no_mangle]
pub unsafe extern "C" fn sn_profile_set_seed(profile: *mut SnProfile, seed: u64) -> SnStatus {
    guard(|| {
        let p = profile.as_mut().ok_or_else(|| null("profile"))?;
        p.0 = p.0.clone().with_seed(seed);
        Ok(())
    })
}

/// # Safety
/// `profile` must be null or a live handle from [`sn_profile_parse`].
#[no_mangle]
pub unsafe extern "C" fn sn_profile_free(profile: *mut SnProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Builds the alphabet for base `s`, exponents `ms[0..ms_len]`, excluded
/// exponent `n` and multiplicity `c`.
///
/// # Safety
/// `ms` must point to `ms_len` values (or be null with `ms_len == 0`);
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_alphabet_new(
    s: u32,
    ms: *const u64,
    ms_len: usize,
    n: u64,
    c: u64,
    out: *mut *mut SnAlphabet,
) -> SnStatus {
    guard(|| {
        let set: BTreeSet<u64> = match (ms.is_null(), ms_len) {
            (_, 0) => BTreeSet::new(),
            (true, _) => return Err(null("ms")),
            (false, len) => std::slice::from_raw_parts(ms, len).iter().copied().collect(),
        };
        let alphabet = balanced_alphabet(s, &set, n, c)?;
        write(out, Box::into_raw(Box::new(SnAlphabet(alphabet))), "out")
    })
}

/// The alphabet as a JSON document.
///
/// # Safety
/// `alphabet` must be a live handle; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_alphabet_json(alphabet: *const SnAlphabet, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let a = handle(alphabet, "alphabet")?;
        let json = serde_json::to_string(&a.0.to_json()?).map_err(Error::from)?;
        write_string(out, json)
    })
}

/// Length of each alphabet symbol in base-`s` digits, as a decimal string.
///
/// # Safety
/// `alphabet` must be a live handle; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_alphabet_ell_u(alphabet: *const SnAlphabet, out: *mut *mut c_char) -> SnStatus {
    guard(|| write_string(out, handle(alphabet, "alphabet")?.0.ell_u().to_string()))
}

/// # Safety
/// `alphabet` must be null or a live handle from [`sn_alphabet_new`].
#[no_mangle]
pub unsafe extern "C" fn sn_alphabet_free(alphabet: *mut SnAlphabet) {
    if !alphabet.is_null() {
        drop(Box::from_raw(alphabet));
    }
}

/// Runs the construction for `profile` to its stopping position.
///
/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_construct(profile: *const SnProfile, out: *mut *mut SnConstruction) -> SnStatus {
    guard(|| {
        let (last, records) = run(&handle(profile, "profile")?.0)?;
        write(out, Box::into_raw(Box::new(SnConstruction { records, last })), "out")
    })
}

/// Number of stages in a construction.
///
/// # Safety
/// `run` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_construction_stage_count(run: *const SnConstruction, out: *mut usize) -> SnStatus {
    guard(|| write(out, handle(run, "run")?.records.len(), "out"))
}

/// The stage log, one JSON record per line.
///
/// # Safety
/// `run` must be a live handle; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_construction_stages_jsonl(run: *const SnConstruction, out: *mut *mut c_char) -> SnStatus {
    guard(|| write_string(out, to_jsonl(&handle(run, "run")?.records)?))
}

/// The final point and position as JSON.
///
/// # Safety
/// `run` must be a live handle; free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_construction_final_json(run: *const SnConstruction, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(run, "run")?.last).map_err(Error::from)?;
        write_string(out, json)
    })
}

/// # Safety
/// `run` must be null or a live handle from [`sn_construct`].
#[no_mangle]
pub unsafe extern "C" fn sn_construction_free(run: *mut SnConstruction) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Replays a stage log against `profile`. `*ok` reports the verdict; when
/// it is false, `*failed_stage` holds the first rejected stage (or the
/// stage count when the log stops short) and the reason is available from
/// [`sn_last_error`]. `failed_stage` may be null.
///
/// # Safety
/// `stages_jsonl` must be a nul-terminated string, `profile` a live handle
/// and `ok` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_verify(
    stages_jsonl: *const c_char,
    profile: *const SnProfile,
    ok: *mut bool,
    failed_stage: *mut u64,
) -> SnStatus {
    let mut reason = None;
    let status = guard(|| {
        let records = parse_jsonl(read_str(stages_jsonl, "stages_jsonl")?)?;
        let report = verify_stage_log(&records, &handle(profile, "profile")?.0)?;
        if let Some((stage, why)) = &report.failure {
            if !failed_stage.is_null() {
                failed_stage.write(*stage);
            }
            reason = Some(why.clone());
        }
        write(ok, report.ok(), "ok")
    });
    if let Some(why) = reason {
        set_error(why);
    }
    status
}
