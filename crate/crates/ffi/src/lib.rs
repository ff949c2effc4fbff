//! C ABI over `recur-core`.
//!
//! Every function returns a [`RecurStatus`] and writes results through out
//! pointers. On failure the message is available from [`recur_last_error`]
//! on the same thread. Strings returned by the library are released with
//! [`recur_string_free`]; frequency handles with [`recur_frequencies_free`].
//! Torus points and rationals cross the boundary as strings (`"1/3"`,
//! `"0.25"`, `"0x..."` for raw 128-bit residues).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use recur_core::bohr::{bh_contains, bohr_contains, hamming_ball_size, sqrt_primes, BohrHammingSpec, BohrSpec};
use recur_core::diophantine::{kronecker_approximate, ApproxQuery};
use recur_core::kleitman::{kleitman_check, KleitmanInstance, Mode, DEFAULT_EXHAUSTIVE_CAP};
use recur_core::ks::{build_ks_pipeline, Caps, PipelineConfig, SetSpec};
use recur_core::torus::{char_distance, parse_ratio, torus_norm, Frequencies};
use recur_core::{Error, TorusPoint, Verdict, Window};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecurStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    NotFound = 4,
    Cap = 5,
    Certificate = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecurVerdict {
    No = 0,
    Yes = 1,
    Ambiguous = 2,
}

impl From<Verdict> for RecurVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::No => RecurVerdict::No,
            Verdict::Yes => RecurVerdict::Yes,
            Verdict::Ambiguous => RecurVerdict::Ambiguous,
        }
    }
}

/// Opaque frequency vector.
pub struct RecurFrequencies {
    inner: Frequencies,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(RecurStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => RecurStatus::Parse,
            Error::NotFound { .. } | Error::Embedding { .. } => RecurStatus::NotFound,
            Error::Cap(_) => RecurStatus::Cap,
            Error::Certificate { .. } | Error::Precision { .. } => RecurStatus::Certificate,
            Error::Io(_) => RecurStatus::Io,
            _ => RecurStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(RecurStatus::Parse, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(RecurStatus::InvalidArgument, msg.to_string())
}

fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> RecurStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RecurStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RecurStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RecurStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RecurStatus::Parse, "string is not UTF-8".into()))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(RecurStatus::NullPointer, "null output pointer".into()))
}

unsafe fn freq<'a>(p: *const RecurFrequencies) -> Result<&'a Frequencies, Failure> {
    p.as_ref()
        .map(|f| &f.inner)
        .ok_or_else(|| Failure(RecurStatus::NullPointer, "null frequency handle".into()))
}

fn point(s: &str) -> Result<TorusPoint, Failure> {
    Ok(s.parse::<TorusPoint>()?)
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| invalid("string contains a NUL byte"))
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn recur_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn recur_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn recur_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `||x||`, the distance from `x` to the nearest integer.
///
/// # Safety
/// `x` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_torus_norm(x: *const c_char, out_value: *mut f64) -> RecurStatus {
    guarded(|| {
        *out(out_value)? = torus_norm(&point(text(x)?)?);
        Ok(())
    })
}

/// `|e(x) - 1|`.
///
/// # Safety
/// `x` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_char_distance(x: *const c_char, out_value: *mut f64) -> RecurStatus {
    guarded(|| {
        *out(out_value)? = char_distance(&point(text(x)?)?);
        Ok(())
    })
}

/// Certified frequencies built from square roots of the first `d` primes.
///
/// # Safety
/// `handle` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_frequencies_sqrt_primes(d: usize, handle: *mut *mut RecurFrequencies) -> RecurStatus {
    guarded(|| {
        let slot = out(handle)?;
        let inner = sqrt_primes(d)?.into();
        *slot = Box::into_raw(Box::new(RecurFrequencies { inner }));
        Ok(())
    })
}

/// Frequencies from their JSON form (as written by the CLI).
///
/// # Safety
/// `json` must be a NUL-terminated string and `handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_frequencies_from_json(
    json: *const c_char,
    handle: *mut *mut RecurFrequencies,
) -> RecurStatus {
    guarded(|| {
        let slot = out(handle)?;
        let inner: Frequencies = serde_json::from_str(text(json)?)?;
        if inner.dim() == 0 {
            return Err(invalid("frequency list must be nonempty"));
        }
        *slot = Box::into_raw(Box::new(RecurFrequencies { inner }));
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle and `json` a valid pointer. Free the result with
/// [`recur_string_free`].
#[no_mangle]
pub unsafe extern "C" fn recur_frequencies_to_json(f: *const RecurFrequencies, json: *mut *mut c_char) -> RecurStatus {
    guarded(|| {
        let slot = out(json)?;
        *slot = owned_string(serde_json::to_string(freq(f)?)?)?;
        Ok(())
    })
}

/// Number of coordinates, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn recur_frequencies_dim(f: *const RecurFrequencies) -> usize {
    f.as_ref().map_or(0, |f| f.inner.dim())
}

/// # Safety
/// `f` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn recur_frequencies_free(f: *mut RecurFrequencies) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Membership of `n` in the Bohr set of width `eta`.
///
/// # Safety
/// `f` must be a live handle, `eta` a NUL-terminated string, `verdict` valid.
#[no_mangle]
pub unsafe extern "C" fn recur_bohr_contains(
    f: *const RecurFrequencies,
    eta: *const c_char,
    n: i64,
    verdict: *mut RecurVerdict,
) -> RecurStatus {
    guarded(|| {
        let slot = out(verdict)?;
        let spec = BohrSpec::new(freq(f)?.clone(), parse_ratio(text(eta)?)?)?;
        *slot = bohr_contains(&spec, n).into();
        Ok(())
    })
}

/// Membership of `n` in the shifted Bohr-Hamming neighborhood.
///
/// # Safety
/// `f` must be a live handle, `eps` and `eta` NUL-terminated strings,
/// `verdict` valid.
#[no_mangle]
pub unsafe extern "C" fn recur_bh_contains(
    f: *const RecurFrequencies,
    eps: *const c_char,
    eta: *const c_char,
    shift: i64,
    n: i64,
    verdict: *mut RecurVerdict,
) -> RecurStatus {
    guarded(|| {
        let slot = out(verdict)?;
        let spec = BohrHammingSpec::new(freq(f)?.clone(), parse_ratio(text(eps)?)?, parse_ratio(text(eta)?)?, shift)?;
        *slot = bh_contains(&spec, n).into();
        Ok(())
    })
}

/// Size of a Hamming ball of radius `r` in `Z_k^d`. Fails with `Cap` when
/// the count does not fit in 64 bits.
///
/// # Safety
/// `size` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_hamming_ball_size(k: u64, d: u32, r: u32, size: *mut u64) -> RecurStatus {
    guarded(|| {
        let slot = out(size)?;
        let n = hamming_ball_size(k, d, r)?;
        *slot = u64::try_from(n).map_err(|_| Failure(RecurStatus::Cap, format!("ball size {n} exceeds 64 bits")))?;
        Ok(())
    })
}

/// Smallest `|n| <= bound` with `||n alpha_j - z_j|| < eps` for all `j`.
/// Returns `NotFound` when there is none.
///
/// # Safety
/// `f` must be a live handle, `target` an array of `len` NUL-terminated
/// strings, `eps` a NUL-terminated string and `n` valid.
#[no_mangle]
pub unsafe extern "C" fn recur_kronecker_solve(
    f: *const RecurFrequencies,
    target: *const *const c_char,
    len: usize,
    eps: *const c_char,
    bound: u64,
    nonzero: bool,
    n: *mut i64,
) -> RecurStatus {
    guarded(|| {
        let slot = out(n)?;
        if target.is_null() && len > 0 {
            return Err(Failure(RecurStatus::NullPointer, "null target array".into()));
        }
        let z = (0..len).map(|i| point(text(*target.add(i))?)).collect::<Result<Vec<_>, _>>()?;
        let mut q = ApproxQuery::new(freq(f)?.clone(), z, parse_ratio(text(eps)?)?, bound)?;
        if nonzero {
            q = q.nonzero();
        }
        *slot = kronecker_approximate(&q)?.n;
        Ok(())
    })
}

/// Exhaustive Kleitman check in `Z_k^d`. Sets `holds` to 1 when every subset
/// of density at least `delta` has difference set meeting the radius-`r`
/// Hamming ball in a nonzero element.
///
/// # Safety
/// `delta` must be a NUL-terminated string and `holds` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn recur_kleitman_check(
    k: u32,
    d: u32,
    delta: *const c_char,
    r: u32,
    holds: *mut bool,
) -> RecurStatus {
    guarded(|| {
        let slot = out(holds)?;
        let inst = KleitmanInstance {
            k,
            d,
            delta: parse_ratio(text(delta)?)?,
            r,
            mode: Mode::Exhaustive,
        };
        *slot = kleitman_check(&inst, DEFAULT_EXHAUSTIVE_CAP)?.holds();
        Ok(())
    })
}

/// Runs the staged construction for the set described by `set_json` on
/// `[lo, hi]` and returns the full report as JSON. `caps_json` may be null
/// for defaults. `violations` receives the number of failed checks.
///
/// # Safety
/// String arguments must be NUL-terminated (or null for `caps_json`); out
/// pointers must be valid. Free the report with [`recur_string_free`].
#[no_mangle]
pub unsafe extern "C" fn recur_ks_build_json(
    set_json: *const c_char,
    stages: usize,
    lo: i64,
    hi: i64,
    caps_json: *const c_char,
    report: *mut *mut c_char,
    violations: *mut usize,
) -> RecurStatus {
    guarded(|| {
        let (slot, count) = (out(report)?, out(violations)?);
        let set: SetSpec = serde_json::from_str(text(set_json)?)?;
        let caps: Caps = if caps_json.is_null() { Caps::default() } else { serde_json::from_str(text(caps_json)?)? };
        let cfg = PipelineConfig::new(stages, vec![0], Window::new(lo, hi)?, caps)?;
        let r = build_ks_pipeline(&set, &cfg)?;
        *count = r.violations();
        *slot = owned_string(serde_json::to_string(&r)?)?;
        Ok(())
    })
}
