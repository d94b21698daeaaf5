//! C ABI over `sparsedp`.
//!
//! Every fallible function returns an `SDP_*` status code and writes its
//! result through an out-pointer. On failure the message is kept in a
//! thread-local slot readable with [`sdp_last_error`]. Factorizations are
//! passed around as opaque `SdpFactorization` handles owned by the caller
//! and released with [`sdp_factorization_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparsedp::accountant::{self, DpTarget, GeometryBounds, Mechanism, RdpProfile};
use sparsedp::matfac::{self, Factorization, Method};
use sparsedp::transform::{hadamard_rotate_in_place, RotationSeed};
use sparsedp::Error;

pub const SDP_OK: i32 = 0;
pub const SDP_ERR_NULL: i32 = 1;
pub const SDP_ERR_DOMAIN: i32 = 2;
pub const SDP_ERR_NUMERICAL: i32 = 3;
pub const SDP_ERR_INFEASIBLE: i32 = 4;
pub const SDP_ERR_IO: i32 = 5;
pub const SDP_ERR_BUFFER: i32 = 6;
pub const SDP_ERR_PANIC: i32 = 7;

pub const SDP_MECHANISM_GAUSSIAN: i32 = 0;
pub const SDP_MECHANISM_CSGM: i32 = 1;
pub const SDP_MECHANISM_SGMF: i32 = 2;

pub const SDP_METHOD_TRIVIAL_B: i32 = 0;
pub const SDP_METHOD_TRIVIAL_C: i32 = 1;
pub const SDP_METHOD_SQRT: i32 = 2;
pub const SDP_METHOD_OPTIMAL: i32 = 3;

/// Opaque factorization handle.
pub struct SdpFactorization {
    inner: Factorization,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } | Error::Diverged { .. } => SDP_ERR_NUMERICAL,
        Error::Infeasible(_) => SDP_ERR_INFEASIBLE,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => SDP_ERR_IO,
        _ => SDP_ERR_DOMAIN,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SDP_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            SDP_ERR_PANIC
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(SDP_ERR_NULL, format!("`{name}` is null"))
}

unsafe fn write<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    *out = v;
    Ok(())
}

fn mechanism(m: i32) -> Result<Mechanism, Fail> {
    match m {
        SDP_MECHANISM_GAUSSIAN => Ok(Mechanism::Gaussian),
        SDP_MECHANISM_CSGM => Ok(Mechanism::Csgm),
        SDP_MECHANISM_SGMF => Ok(Mechanism::Sgmf),
        _ => Err(Fail(SDP_ERR_DOMAIN, format!("unknown mechanism {m}"))),
    }
}

fn method(m: i32) -> Result<Method, Fail> {
    match m {
        SDP_METHOD_TRIVIAL_B => Ok(Method::TrivialB),
        SDP_METHOD_TRIVIAL_C => Ok(Method::TrivialC),
        SDP_METHOD_SQRT => Ok(Method::Sqrt),
        SDP_METHOD_OPTIMAL => Ok(Method::Optimal),
        _ => Err(Fail(SDP_ERR_DOMAIN, format!("unknown factorization method {m}"))),
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(SDP_ERR_DOMAIN, "path is not UTF-8".into()))
}

unsafe fn deref<'a>(h: *const SdpFactorization) -> Result<&'a Factorization, Fail> {
    h.as_ref().map(|h| &h.inner).ok_or_else(|| null("handle"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Gaussian RDP `α·Δ2²/(2σ²)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_gaussian_rdp(alpha: u32, delta2: f64, sigma: f64, out: *mut f64) -> i32 {
    guard(|| write(out, accountant::gaussian_rdp(alpha, delta2, sigma)?, "out"))
}

/// L2 sparsified-Gaussian RDP bound at order `alpha`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_csgm_rdp(
    alpha: u32,
    delta2: f64,
    delta_inf: f64,
    dim: usize,
    gamma: f64,
    sigma: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let b = GeometryBounds::new(delta2, delta_inf, dim)?;
        write(out, accountant::csgm_rdp(alpha, &b, gamma, sigma)?, "out")
    })
}

/// Streaming bound at factor sensitivity `sens_c`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_sgmf_rdp(
    alpha: u32,
    delta2: f64,
    delta_inf: f64,
    dim: usize,
    sens_c: f64,
    gamma: f64,
    sigma: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let b = GeometryBounds::new(delta2, delta_inf, dim)?;
        write(out, accountant::sgmf_rdp(alpha, &b, sens_c, gamma, sigma)?, "out")
    })
}

/// Converts an RDP profile of `len` orders to `(ε, δ)`.
///
/// # Safety
/// `orders` and `epsilons` must point to `len` readable values; the out
/// pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_rdp_to_dp(
    orders: *const u32,
    epsilons: *const f64,
    len: usize,
    delta: f64,
    epsilon_out: *mut f64,
    alpha_out: *mut u32,
) -> i32 {
    guard(|| {
        if orders.is_null() || epsilons.is_null() {
            return Err(null("orders/epsilons"));
        }
        let o = std::slice::from_raw_parts(orders, len).to_vec();
        let e = std::slice::from_raw_parts(epsilons, len).to_vec();
        let c = accountant::rdp_to_dp(&RdpProfile::new(o, e)?, delta)?;
        write(epsilon_out, c.epsilon, "epsilon_out")?;
        write(alpha_out, c.alpha, "alpha_out")
    })
}

/// Smallest σ meeting `(epsilon, delta)` over orders 2..=256.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_calibrate_sigma(
    mechanism_id: i32,
    epsilon: f64,
    delta: f64,
    delta2: f64,
    delta_inf: f64,
    dim: usize,
    gamma: f64,
    sens_c: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let m = mechanism(mechanism_id)?;
        let b = GeometryBounds::new(delta2, delta_inf, dim)?;
        let t = DpTarget::new(epsilon, delta)?;
        let s = accountant::calibrate_sigma(m, &t, &b, gamma, sens_c, &accountant::default_orders())?;
        write(out, s, "out")
    })
}

/// Randomized Hadamard rotation in place; `len` must be a power of two.
///
/// # Safety
/// `data` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sdp_hadamard_rotate(data: *mut f64, len: usize, seed: u64, inverse: bool) -> i32 {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let v = std::slice::from_raw_parts_mut(data, len);
        hadamard_rotate_in_place(v, RotationSeed(seed), inverse)?;
        Ok(())
    })
}

/// Factorizes the prefix-sum workload of size `rounds`.
///
/// # Safety
/// `out` must be valid for writes; the handle must be released with
/// `sdp_factorization_free`.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_build(
    method_id: i32,
    rounds: usize,
    normalize: bool,
    out: *mut *mut SdpFactorization,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut f = matfac::build(method(method_id)?, rounds)?;
        if normalize {
            f = matfac::normalize_sensitivity(&f)?;
        }
        *out = Box::into_raw(Box::new(SdpFactorization { inner: f }));
        Ok(())
    })
}

/// Loads a factorization JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_load(path: *const c_char, out: *mut *mut SdpFactorization) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = Factorization::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(SdpFactorization { inner: f }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_save(handle: *const SdpFactorization, path: *const c_char) -> i32 {
    guard(|| {
        let f = deref(handle)?;
        f.save(path_arg(path)?)?;
        Ok(())
    })
}

/// Number of rounds `T`, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_rounds(handle: *const SdpFactorization) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.rounds())
}

/// Writes `Δ(C)`, `‖B‖_F²` and the converged flag.
///
/// # Safety
/// `handle` must come from this library; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_info(
    handle: *const SdpFactorization,
    sens_c: *mut f64,
    objective: *mut f64,
    converged: *mut bool,
) -> i32 {
    guard(|| {
        let f = deref(handle)?;
        write(sens_c, f.sens_c, "sens_c")?;
        write(objective, f.objective, "objective")?;
        write(converged, f.converged, "converged")
    })
}

unsafe fn copy_matrix(m: &sparsedp::matfac::Matrix, buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    let (r, c) = m.shape();
    if len < r * c {
        return Err(Fail(SDP_ERR_BUFFER, format!("buffer holds {len} values, need {}", r * c)));
    }
    let out = std::slice::from_raw_parts_mut(buf, r * c);
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
    Ok(())
}

/// Copies `B` row-major into `buf` (`T²` values).
///
/// # Safety
/// `handle` must come from this library; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_copy_b(handle: *const SdpFactorization, buf: *mut f64, len: usize) -> i32 {
    guard(|| copy_matrix(&deref(handle)?.b, buf, len))
}

/// Copies `C` row-major into `buf` (`T²` values).
///
/// # Safety
/// `handle` must come from this library; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_copy_c(handle: *const SdpFactorization, buf: *mut f64, len: usize) -> i32 {
    guard(|| copy_matrix(&deref(handle)?.c, buf, len))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sdp_factorization_free(handle: *mut SdpFactorization) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
