//! C ABI over `dyncc`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns a [`DynccStatus`] and
//! leaves a message for [`dyncc_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dyncc::cc_elevation::{make_serving_plan, BudgetPolicy, ExclusionRule};
use dyncc::dof_analytics::{closed_form_dof, optimize_eta_hat, verify_against_schedule, DofReport};
use dyncc::export::build_schedule;
use dyncc::{Error, NetworkSnapshot, Rational, SystemParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    UnsupportedRegime = 3,
    SuppressionBudget = 4,
    /// DoF undefined or a precondition failed.
    Undefined = 5,
    /// A value does not fit the 64-bit output.
    Overflow = 6,
    Internal = 7,
}

/// Parameters plus the current profile lengths.
pub struct DynccScenario {
    params: SystemParams,
    snapshot: NetworkSnapshot,
}

pub struct DynccReport {
    inner: DofReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DynccCounts {
    pub k_m: u64,
    pub k_u: u64,
    pub j_m: u64,
    pub t_m: u64,
    pub j_u: u64,
    pub t_u: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> DynccStatus {
    match e {
        Error::InvalidParams(_) | Error::ProfileOutOfRange { .. } | Error::Config(_) => DynccStatus::InvalidParams,
        Error::UnsupportedRegime { .. } | Error::NeedsConstraintSearch(_) => DynccStatus::UnsupportedRegime,
        Error::SuppressionBudget { .. } => DynccStatus::SuppressionBudget,
        Error::UndefinedDof(_) | Error::Precondition(_) => DynccStatus::Undefined,
        _ => DynccStatus::Internal,
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (DynccStatus, String)>) -> DynccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DynccStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DynccStatus::Internal
        }
    }
}

fn lift<T>(r: dyncc::Result<T>) -> Result<T, (DynccStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DynccStatus, String) {
    (DynccStatus::NullPointer, format!("{what} is null"))
}

fn split(value: &Rational) -> Result<(u64, u64), (DynccStatus, String)> {
    match (u64::try_from(*value.numer()), u64::try_from(*value.denom())) {
        (Ok(n), Ok(d)) => Ok((n, d)),
        _ => Err((DynccStatus::Overflow, format!("{value} does not fit in 64 bits"))),
    }
}

unsafe fn write_ratio(value: &Rational, num: *mut u64, den: *mut u64) -> Result<(), (DynccStatus, String)> {
    if num.is_null() || den.is_null() {
        return Err(null("output pointer"));
    }
    let (n, d) = split(value)?;
    *num = n;
    *den = d;
    Ok(())
}

/// Creates a scenario with users `1..=K` numbered profile by profile.
///
/// # Safety
/// `lengths` must point to `profiles` readable `u64`s; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_scenario_new(
    alpha: u32,
    profiles: u32,
    t_bar: u32,
    lengths: *const u64,
    out: *mut *mut DynccScenario,
) -> DynccStatus {
    guard(|| {
        if lengths.is_null() || out.is_null() {
            return Err(null("lengths or out"));
        }
        let params = lift(SystemParams::new(alpha as usize, profiles as usize, t_bar as usize))?;
        let raw = std::slice::from_raw_parts(lengths, profiles as usize);
        let lengths: Vec<usize> = raw.iter().map(|&n| n as usize).collect();
        let snapshot = NetworkSnapshot::from_lengths(&lengths);
        *out = Box::into_raw(Box::new(DynccScenario { params, snapshot }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`dyncc_scenario_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dyncc_scenario_free(scenario: *mut DynccScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Closed-form DoF as `num/den` in lowest terms.
///
/// # Safety
/// `scenario` must be a live handle; `num` and `den` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_closed_form_dof(
    scenario: *const DynccScenario,
    eta_hat: u32,
    num: *mut u64,
    den: *mut u64,
) -> DynccStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let dof = lift(closed_form_dof(s.snapshot.lengths(), eta_hat as usize, &s.params))?;
        write_ratio(&dof, num, den)
    })
}

/// Builds both schedules, counts them and checks the count against the
/// closed form.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_verify(
    scenario: *const DynccScenario,
    eta_hat: u32,
    out: *mut *mut DynccReport,
) -> DynccStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(verify_against_schedule(&s.snapshot, eta_hat as usize, &s.params))?;
        *out = Box::into_raw(Box::new(DynccReport { inner }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`dyncc_verify`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dyncc_report_free(report: *mut DynccReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_report_counts(report: *const DynccReport, out: *mut DynccCounts) -> DynccStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = r.inner.counts;
        let cast = |v: u128| u64::try_from(v).map_err(|_| (DynccStatus::Overflow, format!("count {v} overflows")));
        *out = DynccCounts {
            k_m: cast(c.k_m)?,
            k_u: cast(c.k_u)?,
            j_m: cast(c.j_m)?,
            t_m: cast(c.t_m)?,
            j_u: cast(c.j_u)?,
            t_u: cast(c.t_u)?,
        };
        Ok(())
    })
}

/// DoF of the report; `verified` is false when no schedule could be built.
///
/// # Safety
/// `report` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_report_dof(
    report: *const DynccReport,
    num: *mut u64,
    den: *mut u64,
    verified: *mut bool,
) -> DynccStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if verified.is_null() {
            return Err(null("verified"));
        }
        write_ratio(&r.inner.dof(), num, den)?;
        *verified = r.inner.verification.is_verified();
        Ok(())
    })
}

/// Best `eta_hat` over `0..=max eta_p` and its DoF.
///
/// # Safety
/// `scenario` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_optimize(
    scenario: *const DynccScenario,
    best_eta_hat: *mut u32,
    num: *mut u64,
    den: *mut u64,
) -> DynccStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if best_eta_hat.is_null() {
            return Err(null("best_eta_hat"));
        }
        let curve = lift(optimize_eta_hat(s.snapshot.lengths(), &s.params))?;
        write_ratio(&curve.dof_max, num, den)?;
        *best_eta_hat = curve.best_eta_hat as u32;
        Ok(())
    })
}

/// Text dump of the whole delivery phase; free with [`dyncc_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dyncc_schedule_text(
    scenario: *const DynccScenario,
    eta_hat: u32,
    out: *mut *mut c_char,
) -> DynccStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let plan = make_serving_plan(&s.snapshot, eta_hat as usize, ExclusionRule::HighestIds);
        let text = lift(build_schedule(&plan, &s.params, BudgetPolicy::Enforce))?.to_text();
        *out = CString::new(text)
            .map_err(|e| (DynccStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dyncc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message from the last failed call on this thread, or NULL. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dyncc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn dyncc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
