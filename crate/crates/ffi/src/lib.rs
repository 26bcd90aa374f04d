//! C ABI surface for the design engine: an opaque design handle, integer
//! error codes, and a thread-local last-error message.
//!
//! The generated header lands in `include/pspower.h` at build time.

use pspower::design::{power_at, sample_size, ztest_size, DesignInputs, Sidedness};
use pspower::outcome::RSquaredBound;
use pspower::propensity::OverlapSpec;
use pspower::variance::TiltingFunction;
use pspower::Error;
use std::cell::RefCell;
use std::os::raw::c_char;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PspowerStatus {
    Ok = 0,
    /// Invalid argument or parameter outside its domain.
    Domain = 1,
    /// Requested overlap below the attainable minimum for this r.
    InfeasibleOverlap = 2,
    /// Summary inputs are mutually inconsistent.
    Inconsistent = 3,
    /// rho2 exceeds the declared R^2 bound.
    RhoBound = 4,
    /// Numerical routine failed to converge.
    Convergence = 5,
    /// A required pointer argument was null.
    NullPointer = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(e: &Error) -> PspowerStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = e.to_string());
    match e {
        Error::Domain(_) => PspowerStatus::Domain,
        Error::InfeasibleOverlap { .. } => PspowerStatus::InfeasibleOverlap,
        Error::Inconsistent(_) => PspowerStatus::Inconsistent,
        Error::RhoBoundViolation { .. } => PspowerStatus::RhoBound,
        Error::QuadratureConvergence { .. } | Error::NoConvergence { .. } => {
            PspowerStatus::Convergence
        }
        Error::RankDeficient(_) | Error::Estimation(_) => PspowerStatus::Convergence,
    }
}

fn null_error(what: &str) -> PspowerStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = format!("{what} must not be null"));
    PspowerStatus::NullPointer
}

/// Opaque design handle; create with pspower_design_new, release with
/// pspower_design_free.
pub struct PspowerDesign {
    inputs: DesignInputs,
}

fn estimand_from(code: i32) -> Option<TiltingFunction> {
    match code {
        0 => Some(TiltingFunction::Ate),
        1 => Some(TiltingFunction::Att),
        2 => Some(TiltingFunction::Ato),
        _ => None,
    }
}

/// Creates a design handle for treatment proportion `r`, overlap `phi` and
/// standardized effect size `tau_std`, with defaults alpha = 0.05 (two
/// sided), target power 0.8, ATE estimand and rho2 = 0. Returns null on
/// invalid input (see pspower_last_error).
#[no_mangle]
pub extern "C" fn pspower_design_new(r: f64, phi: f64, tau_std: f64) -> *mut PspowerDesign {
    let overlap = match OverlapSpec::new(r, phi) {
        Ok(o) => o,
        Err(e) => {
            set_error(&e);
            return std::ptr::null_mut();
        }
    };
    let inputs = DesignInputs {
        alpha: 0.05,
        beta: 0.8,
        tau_std,
        sidedness: Sidedness::Two,
        estimand: TiltingFunction::Ate,
        overlap,
        rho2: 0.0,
        r2_bound: None,
        v0_override: None,
    };
    if let Err(e) = inputs.validate() {
        set_error(&e);
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(PspowerDesign { inputs }))
}

/// Releases a design handle; null is ignored.
#[no_mangle]
pub extern "C" fn pspower_design_free(design: *mut PspowerDesign) {
    if !design.is_null() {
        drop(unsafe { Box::from_raw(design) });
    }
}

unsafe fn update(
    design: *mut PspowerDesign,
    f: impl FnOnce(&mut DesignInputs),
) -> PspowerStatus {
    let Some(d) = (unsafe { design.as_mut() }) else {
        return null_error("design");
    };
    let mut candidate = d.inputs;
    f(&mut candidate);
    match candidate.validate() {
        Ok(()) => {
            d.inputs = candidate;
            PspowerStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Sets the test level; `two_sided` is 0 for one-sided, nonzero otherwise.
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_alpha(
    design: *mut PspowerDesign,
    alpha: f64,
    two_sided: i32,
) -> PspowerStatus {
    unsafe {
        update(design, |d| {
            d.alpha = alpha;
            d.sidedness = if two_sided == 0 { Sidedness::One } else { Sidedness::Two };
        })
    }
}

/// Sets the target power (in (0.5, 1)).
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_power(
    design: *mut PspowerDesign,
    power: f64,
) -> PspowerStatus {
    unsafe { update(design, |d| d.beta = power) }
}

/// Sets the confounder-outcome squared correlation rho2 in [0, 1).
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_rho2(
    design: *mut PspowerDesign,
    rho2: f64,
) -> PspowerStatus {
    unsafe { update(design, |d| d.rho2 = rho2) }
}

/// Sets the estimand: 0 = ATE, 1 = ATT, 2 = ATO.
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_estimand(
    design: *mut PspowerDesign,
    estimand: i32,
) -> PspowerStatus {
    let Some(h) = estimand_from(estimand) else {
        LAST_ERROR
            .with(|slot| *slot.borrow_mut() = format!("estimand code {estimand} not in 0..=2"));
        return PspowerStatus::Domain;
    };
    unsafe { update(design, |d| d.estimand = h) }
}

/// Declares an R^2 upper bound for rho2; pass a negative value to clear it.
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_r2_bound(
    design: *mut PspowerDesign,
    r2: f64,
) -> PspowerStatus {
    let bound = if r2 < 0.0 {
        None
    } else {
        match RSquaredBound::new(r2) {
            Ok(b) => Some(b),
            Err(e) => return set_error(&e),
        }
    };
    unsafe { update(design, |d| d.r2_bound = bound) }
}

/// Supplies the estimated-score variance for the two-variance power form;
/// pass a non-positive value to clear it.
///
/// # Safety
/// `design` must be a live handle from pspower_design_new.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_set_v0(
    design: *mut PspowerDesign,
    v0: f64,
) -> PspowerStatus {
    unsafe { update(design, |d| d.v0_override = if v0 > 0.0 { Some(v0) } else { None }) }
}

/// Minimal sample size for the configured design, written to `n_out`.
///
/// # Safety
/// `design` must be a live handle; `n_out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_sample_size(
    design: *const PspowerDesign,
    n_out: *mut u64,
) -> PspowerStatus {
    let Some(d) = (unsafe { design.as_ref() }) else {
        return null_error("design");
    };
    if n_out.is_null() {
        return null_error("n_out");
    }
    match sample_size(&d.inputs) {
        Ok(res) => {
            unsafe { *n_out = res.n };
            PspowerStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Power of the level-alpha test at sample size `n`, written to `power_out`.
///
/// # Safety
/// `design` must be a live handle; `power_out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_power_at(
    design: *const PspowerDesign,
    n: u64,
    power_out: *mut f64,
) -> PspowerStatus {
    let Some(d) = (unsafe { design.as_ref() }) else {
        return null_error("design");
    };
    if power_out.is_null() {
        return null_error("power_out");
    }
    match power_at(&d.inputs, n) {
        Ok(p) => {
            unsafe { *power_out = p };
            PspowerStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Standardized variance decomposition (v_total = v_sh + rho2 * v_adj) for
/// the configured design. Any output pointer may be null to skip it.
///
/// # Safety
/// `design` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pspower_design_variance(
    design: *const PspowerDesign,
    v_total: *mut f64,
    v_sh: *mut f64,
    v_adj: *mut f64,
) -> PspowerStatus {
    let Some(d) = (unsafe { design.as_ref() }) else {
        return null_error("design");
    };
    match sample_size(&d.inputs) {
        Ok(res) => {
            unsafe {
                if !v_total.is_null() {
                    *v_total = res.variance.v_total;
                }
                if !v_sh.is_null() {
                    *v_sh = res.variance.v_sh;
                }
                if !v_adj.is_null() {
                    *v_adj = res.variance.v_adj;
                }
            }
            PspowerStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Two-sample z-test sample size (the randomized-trial baseline), written
/// to `n_out`. `two_sided` is 0 for one-sided, nonzero otherwise.
///
/// # Safety
/// `n_out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pspower_ztest_size(
    alpha: f64,
    power: f64,
    r: f64,
    tau_std: f64,
    two_sided: i32,
    n_out: *mut u64,
) -> PspowerStatus {
    if n_out.is_null() {
        return null_error("n_out");
    }
    let sided = if two_sided == 0 { Sidedness::One } else { Sidedness::Two };
    match ztest_size(alpha, power, r, tau_std, sided) {
        Ok(n) => {
            unsafe { *n_out = n };
            PspowerStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Copies the last error message on this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, or 0 when no error has occurred.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes (or be null to query
/// the length only).
#[no_mangle]
pub unsafe extern "C" fn pspower_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if msg.is_empty() {
            return 0;
        }
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pspower_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
