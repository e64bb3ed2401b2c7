//! C ABI over `rdbp-core`.
//!
//! Every function returns an [`RdbpStatus`]; results go through out-pointers.
//! On failure the message is available from [`rdbp_last_error`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned through `*mut *mut c_char` are released with
//! [`rdbp_string_free`].

use rdbp_core::brs::brs_bound;
use rdbp_core::config::ExperimentConfig;
use rdbp_core::dists::ClaimDistribution;
use rdbp_core::equilibrium::{solve_equilibrium, Alpha, Classification, EquilibriumSolution};
use rdbp_core::sim::monte_carlo;
use rdbp_core::transport::{northwest_plan, quantile_coupling_cost, Balance, DiscreteMarginal};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdbpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdbpClassification {
    Strict = 0,
    Critical = 1,
    Inadmissible = 2,
}

/// One equilibrium. `alpha_any` is true when every `α > 0` solves the
/// balance; `alpha` is NaN then.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RdbpSolution {
    pub tau: f64,
    pub alpha: f64,
    pub alpha_any: bool,
    pub effective_mean: f64,
    pub classification: RdbpClassification,
    pub equation_residual: f64,
    pub constraint_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RdbpBrsBound {
    /// `+inf` when the whole mean fits in the budget and the law is unbounded.
    pub tau_star: f64,
    pub bound: f64,
}

/// Opaque claim law.
pub struct RdbpClaim(ClaimDistribution);

/// Opaque list of equilibria, sorted by `τ`.
pub struct RdbpSolutions(Vec<EquilibriumSolution>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: RdbpStatus, msg: impl Into<String>) -> RdbpStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> RdbpStatus>(f: F) -> RdbpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == RdbpStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(_) => fail(RdbpStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, RdbpStatus> {
    if s.is_null() {
        return Err(fail(RdbpStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(RdbpStatus::InvalidUtf8, e.to_string()))
}

fn write_string(out: *mut *mut c_char, text: String) -> RdbpStatus {
    match CString::new(text) {
        Ok(c) => {
            // SAFETY: callers check `out` for null before building the string.
            unsafe { *out = c.into_raw() };
            RdbpStatus::Ok
        }
        Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(RdbpStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rdbp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rdbp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a claim law from its JSON record, e.g.
/// `{"family": "exponential", "rate": 1.0}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_claim_from_json(json: *const c_char, out: *mut *mut RdbpClaim) -> RdbpStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(read_str(json));
        match serde_json::from_str::<ClaimDistribution>(text) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(RdbpClaim(d)));
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `claim` must come from [`rdbp_claim_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rdbp_claim_free(claim: *mut RdbpClaim) {
    if !claim.is_null() {
        drop(Box::from_raw(claim));
    }
}

/// # Safety
/// `claim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_claim_cdf(claim: *const RdbpClaim, x: f64, out: *mut f64) -> RdbpStatus {
    guard(|| {
        non_null!(claim, out);
        *out = (*claim).0.cdf(x);
        RdbpStatus::Ok
    })
}

/// `∫₀^τ x dF(x)`.
///
/// # Safety
/// `claim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_claim_partial_mean(claim: *const RdbpClaim, tau: f64, out: *mut f64) -> RdbpStatus {
    guard(|| {
        non_null!(claim, out);
        match (*claim).0.partial_mean(tau) {
            Ok(v) => {
                *out = v;
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `claim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_claim_quantile(claim: *const RdbpClaim, u: f64, out: *mut f64) -> RdbpStatus {
    guard(|| {
        non_null!(claim, out);
        match (*claim).0.quantile(u) {
            Ok(v) => {
                *out = v;
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::OutOfRange, e.to_string()),
        }
    })
}

fn parse_config(text: &str) -> Result<ExperimentConfig, RdbpStatus> {
    ExperimentConfig::from_json(text).map_err(|e| fail(RdbpStatus::InvalidArgument, e.to_string()))
}

/// Solves a two-population experiment config (JSON text).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_equilibrium_solve(config_json: *const c_char, out: *mut *mut RdbpSolutions) -> RdbpStatus {
    guard(|| {
        non_null!(out);
        let config = try_status!(parse_config(try_status!(read_str(config_json))));
        let specs = config.specs();
        let [home, immigrant] = specs.as_slice() else {
            return fail(RdbpStatus::InvalidArgument, "equilibrium needs exactly two sub-populations");
        };
        match solve_equilibrium(home, immigrant, &config.solver) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(RdbpSolutions(report.solutions)));
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `solutions` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdbp_solutions_len(solutions: *const RdbpSolutions) -> usize {
    if solutions.is_null() {
        0
    } else {
        (*solutions).0.len()
    }
}

/// # Safety
/// `solutions` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_solutions_get(
    solutions: *const RdbpSolutions,
    index: usize,
    out: *mut RdbpSolution,
) -> RdbpStatus {
    guard(|| {
        non_null!(solutions, out);
        let list = &(*solutions).0;
        let Some(s) = list.get(index) else {
            return fail(RdbpStatus::OutOfRange, format!("index {index} out of range"));
        };
        let (alpha, alpha_any) = match s.alpha {
            Alpha::Value(a) => (a, false),
            Alpha::AnyPositive => (f64::NAN, true),
        };
        *out = RdbpSolution {
            tau: s.tau,
            alpha,
            alpha_any,
            effective_mean: s.effective_mean,
            classification: match s.classification {
                Classification::Strict => RdbpClassification::Strict,
                Classification::Critical => RdbpClassification::Critical,
                Classification::Inadmissible => RdbpClassification::Inadmissible,
            },
            equation_residual: s.residuals.equation,
            constraint_residual: s.residuals.constraint,
        };
        RdbpStatus::Ok
    })
}

/// # Safety
/// `solutions` must come from [`rdbp_equilibrium_solve`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rdbp_solutions_free(solutions: *mut RdbpSolutions) {
    if !solutions.is_null() {
        drop(Box::from_raw(solutions));
    }
}

/// # Safety
/// `claim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_brs_bound(claim: *const RdbpClaim, n: u64, budget: f64, out: *mut RdbpBrsBound) -> RdbpStatus {
    guard(|| {
        non_null!(claim, out);
        match brs_bound(&(*claim).0, n, budget) {
            Ok(b) => {
                *out = RdbpBrsBound { tau_star: b.tau_star, bound: b.bound };
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Runs the experiment config and returns the summary as JSON text.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
/// Release the result with [`rdbp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn rdbp_simulate_summary_json(config_json: *const c_char, out: *mut *mut c_char) -> RdbpStatus {
    guard(|| {
        non_null!(out);
        let c = try_status!(parse_config(try_status!(read_str(config_json))));
        match monte_carlo(&c.specs(), &c.initial_counts(), &c.sim_options(), c.runs, c.seed) {
            Ok(mc) => match serde_json::to_string(&mc.summary) {
                Ok(text) => write_string(out, text),
                Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
            },
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// `∫ |Q_src − Q_dst|^p du`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdbp_quantile_coupling_cost(
    src: *const RdbpClaim,
    dst: *const RdbpClaim,
    p: f64,
    quad_points: usize,
    out: *mut f64,
) -> RdbpStatus {
    guard(|| {
        non_null!(src, dst, out);
        match quantile_coupling_cost(&(*src).0, &(*dst).0, p, quad_points) {
            Ok(v) => {
                *out = v;
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Northwest-corner plan for balanced marginals `a` (length `m`) and `b`
/// (length `n`); `flows` receives `m * n` row-major entries.
///
/// # Safety
/// `a`, `b` must point to `m`, `n` readable doubles and `flows` to `m * n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rdbp_northwest_plan(
    a: *const f64,
    m: usize,
    b: *const f64,
    n: usize,
    flows: *mut f64,
) -> RdbpStatus {
    guard(|| {
        non_null!(a, b, flows);
        let marginal = |p: *const f64, len: usize| {
            DiscreteMarginal::new(std::slice::from_raw_parts(p, len).to_vec())
                .map_err(|e| fail(RdbpStatus::InvalidArgument, e.to_string()))
        };
        let (a, b) = (try_status!(marginal(a, m)), try_status!(marginal(b, n)));
        match northwest_plan(&a, &b, Balance::Strict) {
            Ok(plan) => {
                std::slice::from_raw_parts_mut(flows, m * n).copy_from_slice(&plan.flows);
                RdbpStatus::Ok
            }
            Err(e) => fail(RdbpStatus::InvalidArgument, e.to_string()),
        }
    })
}
