//! C ABI over the `cvlearn` estimators.
//!
//! States live behind opaque `CvState` handles created by the `cv_state_*`
//! constructors and released with `cv_state_free`. Every fallible call
//! returns a `CvStatus`; on failure `cv_last_error` gives a message that
//! stays valid until the next failing call on the same thread. Panics are
//! caught at the boundary and reported as `CV_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvlearn::protocols::{self, Branch, LearnPlan};
use cvlearn::sampling::{SamplerBackend, SeedStream};
use cvlearn::{Complex64, Error, PhasePoint, StateModel};

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvStatus {
    CV_OK = 0,
    CV_NULL_POINTER = 1,
    CV_INVALID_ARGUMENT = 2,
    CV_UNSUPPORTED = 3,
    CV_NUMERICAL = 4,
    CV_PARSE = 5,
    CV_IO = 6,
    CV_PANIC = 7,
}

/// Branch codes written by `cv_learn_points`.
pub const CV_BRANCH_ZERO: u8 = 0;
pub const CV_BRANCH_REAL_SIGN: u8 = 1;
pub const CV_BRANCH_IMAG_SIGN: u8 = 2;

/// Opaque state handle.
pub struct CvState {
    inner: StateModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CvStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::InvalidParameter { .. } | Error::EmptySamples | Error::MissingSymmetry => {
            CvStatus::CV_INVALID_ARGUMENT
        }
        Error::Unsupported(_) | Error::MemoryBudget(_) => CvStatus::CV_UNSUPPORTED,
        Error::Parse(_) | Error::Json(_) => CvStatus::CV_PARSE,
        Error::Io(_) | Error::Csv(_) => CvStatus::CV_IO,
        _ => CvStatus::CV_NUMERICAL,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvStatus::CV_OK,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            CvStatus::CV_NULL_POINTER
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CvStatus::CV_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Lib(Error::Parse(format!("{name} is not UTF-8"))))
}

unsafe fn state_arg<'a>(p: *const CvState) -> Result<&'a StateModel, Fail> {
    p.as_ref().map(|s| &s.inner).ok_or(Fail::Null("state"))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn points_arg(data: *const f64, n_points: usize, modes: usize) -> Result<Vec<PhasePoint>, Fail> {
    if n_points == 0 {
        return Err(Error::InvalidParameter { name: "n_points", reason: "empty point set".into() }.into());
    }
    if data.is_null() {
        return Err(Fail::Null("points"));
    }
    let flat = std::slice::from_raw_parts(data, 2 * modes * n_points);
    flat.chunks(2 * modes)
        .map(|row| PhasePoint::new(row.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()).map_err(Fail::from))
        .collect()
}

unsafe fn backend_arg(tag: *const c_char, state: &StateModel) -> Result<SamplerBackend, Fail> {
    if tag.is_null() {
        return Ok(SamplerBackend::auto(state));
    }
    Ok(str_arg(tag, "backend")?.parse()?)
}

fn boxed(state: StateModel, out: &mut *mut CvState) {
    *out = Box::into_raw(Box::new(CvState { inner: state }));
}

/// Message of the last failed call on this thread, or NULL.
#[no_mangle]
pub extern "C" fn cv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a state from a TOML state description (the `[state]` table of a config).
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cv_state_from_toml(spec: *const c_char, out: *mut *mut CvState) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let state = StateModel::from_toml_str(str_arg(spec, "spec")?)?;
        boxed(state, out);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cv_state_vacuum(modes: usize, out: *mut *mut CvState) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        boxed(StateModel::vacuum(modes)?, out);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cv_state_fock(n: usize, out: *mut *mut CvState) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        boxed(StateModel::fock(n)?, out);
        Ok(())
    })
}

/// Cat state N(|β⟩ + parity·|−β⟩).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cv_state_cat(beta_re: f64, beta_im: f64, parity: i8, out: *mut *mut CvState) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        boxed(StateModel::cat(Complex64::new(beta_re, beta_im), parity)?, out);
        Ok(())
    })
}

/// # Safety
/// `state` must come from a `cv_state_*` constructor and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cv_state_free(state: *mut CvState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cv_state_modes(state: *const CvState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.modes())
}

/// Analytic C(α); `alpha` holds 2k doubles (re₁, im₁, …).
///
/// # Safety
/// Pointers must be valid; `alpha` must hold 2·modes doubles.
#[no_mangle]
pub unsafe extern "C" fn cv_characteristic(
    state: *const CvState,
    alpha: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> CvStatus {
    guard(|| {
        let s = state_arg(state)?;
        let a = points_arg(alpha, 1, s.modes())?;
        let c = s.characteristic(&a[0])?;
        *out_arg(out_re, "out_re")? = c.re;
        *out_arg(out_im, "out_im")? = c.im;
        Ok(())
    })
}

/// Pair rounds ⌈(8/ε²) ln(4M/δ)⌉ for product or square estimates.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cv_plan_pairs(epsilon: f64, delta: f64, m_points: usize, out: *mut u64) -> CvStatus {
    guard(|| {
        *out_arg(out, "out")? = protocols::plan_product_samples(epsilon, delta, m_points)?;
        Ok(())
    })
}

/// Learning plan: square-stage pairs N₁, copies per sign bank N₂ and the
/// quantum-accounted total.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cv_plan_learn(
    epsilon: f64,
    delta: f64,
    m_points: usize,
    out_n1: *mut u64,
    out_n2: *mut u64,
    out_quantum: *mut u64,
) -> CvStatus {
    guard(|| {
        let plan = LearnPlan::new(epsilon, delta, m_points)?;
        *out_arg(out_n1, "out_n1")? = plan.n1_pairs;
        *out_arg(out_n2, "out_n2")? = plan.n2_copies;
        *out_arg(out_quantum, "out_quantum")? = plan.quantum_copies();
        Ok(())
    })
}

/// Square estimates C(α)² at `n_points` points using the state's declared
/// reflection symmetry. `out` receives 2·n_points doubles (re, im).
///
/// # Safety
/// `points` holds 2·modes·n_points doubles; `backend` is NULL or a tag string.
#[no_mangle]
pub unsafe extern "C" fn cv_estimate_square(
    state: *const CvState,
    points: *const f64,
    n_points: usize,
    n_pairs: u64,
    backend: *const c_char,
    seed: u64,
    out: *mut f64,
) -> CvStatus {
    guard(|| {
        let s = state_arg(state)?;
        let pts = points_arg(points, n_points, s.modes())?;
        let backend = backend_arg(backend, s)?;
        let sym = protocols::resolve_symmetry(s, None)?;
        let v = protocols::estimate_square_points(s, &sym, &pts, n_pairs, &backend, &SeedStream::new(seed, "cf-square"))?;
        write_complex(out, &v)
    })
}

unsafe fn write_complex(out: *mut f64, values: &[Complex64]) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    let dst = std::slice::from_raw_parts_mut(out, 2 * values.len());
    for (d, v) in dst.chunks_mut(2).zip(values) {
        d[0] = v.re;
        d[1] = v.im;
    }
    Ok(())
}

/// Learns C(α) at `n_points` points to accuracy ε with failure probability δ.
/// `out` receives 2·n_points doubles; `out_branch` (nullable) one
/// `CV_BRANCH_*` code per point; `out_copies` (nullable) the
/// quantum-accounted copy count. Uses the same seed scheme as the CLI.
///
/// # Safety
/// `points` holds 2·modes·n_points doubles; output buffers must be large enough.
#[no_mangle]
pub unsafe extern "C" fn cv_learn_points(
    state: *const CvState,
    points: *const f64,
    n_points: usize,
    epsilon: f64,
    delta: f64,
    backend: *const c_char,
    seed: u64,
    out: *mut f64,
    out_branch: *mut u8,
    out_copies: *mut u64,
) -> CvStatus {
    guard(|| {
        let s = state_arg(state)?;
        let pts = points_arg(points, n_points, s.modes())?;
        let backend = backend_arg(backend, s)?;
        let res = protocols::learn_points(s, None, &pts, epsilon, delta, &backend, &SeedStream::new(seed, "learn-points"))?;
        let values: Vec<Complex64> = res.records.iter().map(|r| r.value).collect();
        write_complex(out, &values)?;
        if !out_branch.is_null() {
            let dst = std::slice::from_raw_parts_mut(out_branch, n_points);
            for (d, r) in dst.iter_mut().zip(&res.records) {
                *d = match r.branch {
                    Some(Branch::RealSign) => CV_BRANCH_REAL_SIGN,
                    Some(Branch::ImagSign) => CV_BRANCH_IMAG_SIGN,
                    _ => CV_BRANCH_ZERO,
                };
            }
        }
        if let Some(c) = out_copies.as_mut() {
            *c = res.ledger.quantum_total();
        }
        Ok(())
    })
}
