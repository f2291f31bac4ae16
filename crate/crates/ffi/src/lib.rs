//! C ABI over `heislab`.
//!
//! Every function returns an [`HlStatus`]; results go through out-pointers. On failure the
//! message is kept per thread and read with [`hl_last_error`]. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use heislab::expansion::perturbed_gaussians;
use heislab::lab::{self, ExperimentConfig};
use heislab::linalg::RMat;
use heislab::quadrature::QuadratureScheme;
use heislab::symmetry::Triple;
use heislab::{optimal_constant, standard_gaussians, AttachedParams, Error, ExponentTriple};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Unsupported = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    Utf8 = 8,
    Panic = 9,
}

/// Experiment configuration, created with defaults by [`hl_config_new`].
pub struct HlConfig {
    inner: ExperimentConfig,
}

/// Three Gaussian polynomials on `ℝ^(2d+1)`.
pub struct HlTriple {
    inner: Triple,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::InvalidArgument(_) => HlStatus::InvalidArgument,
        Error::Domain(_) => HlStatus::Domain,
        Error::Unsupported(_) => HlStatus::Unsupported,
        Error::Envelope(_) | Error::BalanceFailed { .. } => HlStatus::Numerical,
        Error::Config(_) => HlStatus::Config,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => HlStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HlStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            HlStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(name))) => {
            set_error(&format!("{name} is not valid UTF-8"));
            HlStatus::Utf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            HlStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn as_mut<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn as_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(name))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn exponents(p: *const f64) -> Result<ExponentTriple, Fail> {
    let p = unsafe { as_slice(p, 3, "p")? };
    Ok(ExponentTriple::new(p[0], p[1], p[2])?)
}

fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let out = unsafe { as_mut(out, "out")? };
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failing call on this thread; empty after a success. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn hl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_config_new(out: *mut *mut HlConfig) -> HlStatus {
    guard(|| boxed(out, HlConfig { inner: ExperimentConfig::default() }))
}

/// Sets one key with the same names and syntax as the command-line flags, e.g.
/// `("grid", "1,2,5")` or `("gh-nodes", "40")`.
///
/// # Safety
/// `cfg` must come from [`hl_config_new`]; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hl_config_set(cfg: *mut HlConfig, key: *const c_char, value: *const c_char) -> HlStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        cfg.inner.set(as_str(key, "key")?, as_str(value, "value")?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`hl_config_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn hl_config_free(cfg: *mut HlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// `A_p^n`.
///
/// # Safety
/// `p` must point to 3 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_optimal_constant(p: *const f64, n: usize, out: *mut f64) -> HlStatus {
    guard(|| {
        let v = optimal_constant(&exponents(p)?, n)?;
        *as_mut(out, "out")? = v;
        Ok(())
    })
}

/// The maximizers `g_j = e^{−γ_j|z|²}` on `ℝ^(2d+1)`.
///
/// # Safety
/// `p` must point to 3 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_triple_gaussians(p: *const f64, d: usize, out: *mut *mut HlTriple) -> HlStatus {
    guard(|| {
        let g = standard_gaussians(&exponents(p)?, 2 * d + 1)?;
        boxed(out, HlTriple { inner: g })
    })
}

/// `g_j + eps·mode_j(α)`.
///
/// # Safety
/// `p` must point to 3 doubles, `alpha` to `alpha_len` integers, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_triple_perturbed(
    p: *const f64,
    d: usize,
    eps: f64,
    alpha: *const u32,
    alpha_len: usize,
    out: *mut *mut HlTriple,
) -> HlStatus {
    guard(|| {
        let alpha = as_slice(alpha, alpha_len, "alpha")?;
        let f = perturbed_gaussians(&exponents(p)?, 2 * d + 1, eps, alpha)?;
        boxed(out, HlTriple { inner: f })
    })
}

/// The `d = 1` family `e^{−γ_j(λ|x|²+λ⁻¹t²+iλ⁻¹t)}`.
///
/// # Safety
/// `p` must point to 3 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_triple_lambda(p: *const f64, lambda: f64, out: *mut *mut HlTriple) -> HlStatus {
    guard(|| {
        let f = lab::lambda_family(&exponents(p)?, lambda)?;
        boxed(out, HlTriple { inner: f })
    })
}

/// Point value of `f_j` at `z ∈ ℝ^(2d+1)`.
///
/// # Safety
/// `z` must point to `len` doubles; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_triple_eval(
    f: *const HlTriple,
    j: usize,
    z: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
) -> HlStatus {
    guard(|| {
        let f = as_ref(f, "f")?;
        let z = as_slice(z, len, "z")?;
        let fj = f.inner.get(j).ok_or_else(|| Error::InvalidArgument(format!("index {j} is not 0, 1 or 2")))?;
        if z.len() != fj.dim() {
            return Err(Error::InvalidArgument(format!("point has {} coordinates, expected {}", z.len(), fj.dim())).into());
        }
        let v = fj.eval(z);
        *as_mut(re, "re")? = v.re;
        *as_mut(im, "im")? = v.im;
        Ok(())
    })
}

/// # Safety
/// `f` must come from one of the `hl_triple_*` constructors or be null.
#[no_mangle]
pub unsafe extern "C" fn hl_triple_free(f: *mut HlTriple) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

fn phi_inner(f: *const HlTriple, p: *const f64, a: *const f64, a_len: usize, b: f64, gh_nodes: usize) -> Result<heislab::quadrature::PhiEstimate, Fail> {
    let f = unsafe { as_ref(f, "f")? };
    let p = exponents(p)?;
    let a = unsafe { as_slice(a, a_len, "a")? };
    let m = f.inner[0].dim() - 1;
    if a.len() != m * m {
        return Err(Error::InvalidArgument(format!("A needs {} row-major entries, got {}", m * m, a.len())).into());
    }
    let params = AttachedParams::new(RMat::from_row_slice(m, m, a), b)?;
    let scheme = QuadratureScheme::gauss_hermite(gh_nodes)?;
    Ok(heislab::quadrature::phi_gauss_poly(&f.inner, &p, &params, &scheme)?)
}

/// `Φ(f, A, b)` with Gauss–Hermite quadrature where no closed form applies. `a` holds the
/// `2d×2d` matrix row-major.
///
/// # Safety
/// `p` must point to 3 doubles, `a` to `a_len` doubles; `value` and `error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_phi(
    f: *const HlTriple,
    p: *const f64,
    a: *const f64,
    a_len: usize,
    b: f64,
    gh_nodes: usize,
    value: *mut f64,
    error: *mut f64,
) -> HlStatus {
    guard(|| {
        let est = phi_inner(f, p, a, a_len, b, gh_nodes)?;
        *as_mut(value, "value")? = est.value;
        *as_mut(error, "error")? = est.error;
        Ok(())
    })
}

/// `δ = 1 − Φ / A_p^(2d+1)`, same arguments as [`hl_phi`].
///
/// # Safety
/// As for [`hl_phi`].
#[no_mangle]
pub unsafe extern "C" fn hl_deficit(
    f: *const HlTriple,
    p: *const f64,
    a: *const f64,
    a_len: usize,
    b: f64,
    gh_nodes: usize,
    deficit: *mut f64,
    error: *mut f64,
) -> HlStatus {
    guard(|| {
        let est = phi_inner(f, p, a, a_len, b, gh_nodes)?;
        let ap = optimal_constant(&exponents(p)?, as_ref(f, "f")?.inner[0].dim())?;
        *as_mut(deficit, "deficit")? = 1.0 - est.value / ap;
        *as_mut(error, "error")? = est.error / ap;
        Ok(())
    })
}

/// Runs one of `verify`, `lambda`, `exponent-fit`, `deficit`, `distance` and returns its JSON
/// report in `json` (free with [`hl_string_free`]) and its failure count in `failures`.
///
/// # Safety
/// `cfg` must come from [`hl_config_new`]; `command` must be NUL-terminated; `json` and
/// `failures` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_run(
    cfg: *const HlConfig,
    command: *const c_char,
    json: *mut *mut c_char,
    failures: *mut usize,
) -> HlStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.inner;
        let json = as_mut(json, "json")?;
        let failures = as_mut(failures, "failures")?;
        let (text, n) = match as_str(command, "command")? {
            "verify" => {
                let r = lab::verify_suite(cfg)?;
                (lab::to_json(&r)?, r.failures())
            }
            "lambda" => {
                let r = lab::lambda_family_experiment(cfg)?;
                (lab::to_json(&r)?, r.failures())
            }
            "exponent-fit" => {
                let r = lab::exponent_fit_experiment(cfg)?;
                (lab::to_json(&r)?, r.failures())
            }
            "deficit" => {
                let r = lab::deficit_point(cfg)?;
                (lab::to_json(&r)?, usize::from(r.young_violation))
            }
            "distance" => (lab::to_json(&lab::distance_point(cfg)?)?, 0),
            other => return Err(Error::InvalidArgument(format!("unknown command {other:?}")).into()),
        };
        *json = CString::new(text).map_err(|_| Error::InvalidArgument("report contains NUL".into()))?.into_raw();
        *failures = n;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
