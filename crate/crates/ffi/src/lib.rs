//! C ABI over `ration_lab`.
//!
//! Instances and policies are opaque heap handles released with their
//! `*_free` function. Fallible calls return an [`RlStatus`]; on failure the
//! message is available from [`rl_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ration_lab::bounds::{self, GuaranteeTable};
use ration_lab::instances::{hard_instance_overdemanded, hard_instance_underdemanded};
use ration_lab::io::parse_instance;
use ration_lab::policies::{ppa_decide, tfr_decide};
use ration_lab::{evaluate_policy, fill_rate, Error, InstanceSpec, Policy, PolicySpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidInstance = 4,
    AllocationExceedsDemand = 5,
    BudgetExceeded = 6,
    Numeric = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque instance handle.
pub struct RlInstance {
    inner: InstanceSpec,
}

/// Opaque policy handle.
pub struct RlPolicy {
    inner: Policy,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlReport {
    pub mu: f64,
    pub ex_post: f64,
    pub ex_ante: f64,
    pub ex_post_fairness: f64,
    pub ex_ante_fairness: f64,
    pub waste: f64,
    pub offline_ex_post: f64,
    pub half_width_95: f64,
    pub paths_used: u64,
    /// Whether the report came from full enumeration.
    pub exact: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlGuarantees {
    pub mu: f64,
    pub n: u64,
    pub kappa_p: f64,
    pub kappa_a: f64,
    pub kappa_fa: f64,
    pub kappa_tfr: f64,
    pub w_bar: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::InvalidInstance(_) | Error::Json(_) => RlStatus::InvalidInstance,
        Error::InvalidArgument(_) | Error::InfeasibleBudget(_) => RlStatus::InvalidArgument,
        Error::AllocationExceedsDemand { .. } => RlStatus::AllocationExceedsDemand,
        Error::BudgetExceeded { .. } => RlStatus::BudgetExceeded,
        Error::Io(_) => RlStatus::Io,
        _ => RlStatus::Numeric,
    }
}

/// Runs `f`, recording any error or panic for `rl_last_error_message`.
fn guard<F: FnOnce() -> Result<(), RlStatus>>(f: F) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RlStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            RlStatus::Panic
        }
    }
}

fn fail(e: Error) -> RlStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> RlStatus {
    set_error(&format!("{what} is null"));
    RlStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, RlStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        RlStatus::InvalidUtf8
    })
}

/// Message describing the last failure on this thread (empty after a
/// success). Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn rl_kappa_p(mu: f64, n: usize) -> f64 {
    bounds::kappa_p(mu, n)
}

#[no_mangle]
pub extern "C" fn rl_kappa_a(mu: f64, n: usize) -> f64 {
    bounds::kappa_a(mu, n)
}

#[no_mangle]
pub extern "C" fn rl_kappa_tfr(mu: f64) -> f64 {
    bounds::kappa_tfr(mu)
}

/// # Safety
/// `out` must be null or point to writable memory for one `RlGuarantees`.
#[no_mangle]
pub unsafe extern "C" fn rl_guarantees(mu: f64, n: usize, out: *mut RlGuarantees) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(mu >= 0.0) || n == 0 {
            return Err(fail(Error::InvalidArgument("need mu >= 0 and n >= 1".into())));
        }
        let t = GuaranteeTable::new(mu, n);
        *out = RlGuarantees {
            mu: t.mu,
            n: t.n as u64,
            kappa_p: t.kappa_p,
            kappa_a: t.kappa_a,
            kappa_fa: t.kappa_fa,
            kappa_tfr: t.kappa_tfr,
            w_bar: t.w_bar,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn rl_fill_rate(allocation: f64, demand: f64, out: *mut f64) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = fill_rate(allocation, demand).map_err(fail)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rl_ppa_decide(demand: f64, supply: f64, mu_next: f64) -> f64 {
    ppa_decide(demand, supply, mu_next)
}

#[no_mangle]
pub extern "C" fn rl_tfr_decide(tau: f64, demand: f64, supply: f64) -> f64 {
    tfr_decide(tau, demand, supply)
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Parses an instance from JSON text. Relative bank paths resolve against
/// `base_dir`, or the working directory when it is null.
///
/// # Safety
/// `json` and `base_dir` (if non-null) must be NUL-terminated strings; `out`
/// must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_instance_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut RlInstance,
) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let inner = parse_instance(text, Path::new(base)).map_err(fail)?;
        store(out, RlInstance { inner });
        Ok(())
    })
}

/// Hard instance at `(n, mu)` for the regime `mu` falls in, unit supply.
///
/// # Safety
/// `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_instance_hard(n: usize, mu: f64, out: *mut *mut RlInstance) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let model = if n > 0 && mu >= 1.0 + 1.0 / n as f64 {
            hard_instance_overdemanded(n, mu)
        } else {
            hard_instance_underdemanded(n, mu)
        }
        .map_err(fail)?;
        let inner = InstanceSpec::new(model, 1.0).map_err(fail)?;
        store(out, RlInstance { inner });
        Ok(())
    })
}

/// Supply scarcity, or NaN for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_instance_mu(instance: *const RlInstance) -> f64 {
    instance.as_ref().map_or(f64::NAN, |i| i.inner.mu())
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_instance_agents(instance: *const RlInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.inner.n_agents)
}

/// # Safety
/// `instance` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_instance_free(instance: *mut RlInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Builds a policy from its string form ("ppa", "tfr:0.5", "opt-tfr",
/// "offline", "dp:0.01", ...) against an instance.
///
/// # Safety
/// `spec` must be a NUL-terminated string, `instance` a live handle and
/// `out` writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_policy_build(
    spec: *const c_char,
    instance: *const RlInstance,
    out: *mut *mut RlPolicy,
) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec: PolicySpec = str_arg(spec, "spec")?.parse().map_err(fail)?;
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        let inner = Policy::build(&spec, &inst.inner).map_err(fail)?;
        store(out, RlPolicy { inner });
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_policy_free(policy: *mut RlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Evaluates `policy` on `instance` (exact when the support is small,
/// otherwise `paths` seeded Monte Carlo draws).
///
/// # Safety
/// `instance` and `policy` must be live handles; `out` must point to
/// writable memory for one `RlReport`.
#[no_mangle]
pub unsafe extern "C" fn rl_evaluate(
    instance: *const RlInstance,
    policy: *const RlPolicy,
    paths: u64,
    seed: u64,
    out: *mut RlReport,
) -> RlStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        let pol = policy.as_ref().ok_or_else(|| null("policy"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = evaluate_policy(&inst.inner, &pol.inner, paths as usize, seed).map_err(fail)?;
        *out = RlReport {
            mu: r.mu,
            ex_post: r.ex_post,
            ex_ante: r.ex_ante,
            ex_post_fairness: r.ex_post_fairness,
            ex_ante_fairness: r.ex_ante_fairness,
            waste: r.waste,
            offline_ex_post: r.offline_ex_post,
            half_width_95: r.half_width_95,
            paths_used: r.paths_used as u64,
            exact: r.exact,
        };
        Ok(())
    })
}

/// Solves the factor-revealing LP at `(n, mu)` and returns its optimum and
/// the closed-form dual certificate.
///
/// # Safety
/// `primal` and `certificate` must point to writable `double`s.
#[no_mangle]
pub unsafe extern "C" fn rl_lp_verify(
    n: usize,
    mu: f64,
    primal: *mut f64,
    certificate: *mut f64,
) -> RlStatus {
    guard(|| {
        if primal.is_null() || certificate.is_null() {
            return Err(null("output pointer"));
        }
        let c = bounds::lp_verify(n, mu).map_err(fail)?;
        *primal = c.primal;
        *certificate = c.certificate;
        Ok(())
    })
}
