//! C ABI over `paraprod`.
//!
//! Functions and operators are opaque heap handles created by `pp_*_new`
//! style calls and released with the matching `pp_*_free`. Every fallible
//! call returns a [`PpStatus`]; on failure the message of the last error on
//! the calling thread is available through [`pp_last_error_message`].
//!
//! Matrix data crosses the boundary as interleaved `(re, im)` doubles, atom
//! by atom, each atom `N x N` row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64 as C64;
use paraprod::constructions;
use paraprod::majorant;
use paraprod::norms::{self, BmoVariant};
use paraprod::operators::{self, AscentOptions, PowerOptions};
use paraprod::{io, random, DyadicMatrixFunction, Error, LinearMap, OperatorHandle, OperatorKind};

/// Result codes. `Ok` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    ShapeMismatch = 2,
    OutOfRange = 3,
    NotHermitian = 4,
    NotPositive = 5,
    Degenerate = 6,
    TooLarge = 7,
    /// The value written is the best estimate reached.
    NoConvergence = 8,
    /// The value written is the best certified-feasible estimate reached.
    SolverStalled = 9,
    Invalid = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PpNormKind {
    BmoC = 0,
    BmoR = 1,
    BmoCr = 2,
    BmoM = 3,
    H1Max = 4,
    /// Uses the `p` argument.
    Lp = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PpOperatorKind {
    Paraproduct = 0,
    ParaproductAdjoint = 1,
    HaarMultiplier = 2,
}

/// Opaque matrix function handle.
pub struct PpFunction(DyadicMatrixFunction);

/// Opaque operator handle.
pub struct PpOperator(OperatorHandle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> PpStatus {
    match e {
        Error::ShapeMismatch(_) | Error::NotSquare { .. } => PpStatus::ShapeMismatch,
        Error::OutOfRange { .. } => PpStatus::OutOfRange,
        Error::NotHermitian { .. } => PpStatus::NotHermitian,
        Error::NotPositive { .. } => PpStatus::NotPositive,
        Error::Degenerate(_) => PpStatus::Degenerate,
        Error::TooLarge { .. } => PpStatus::TooLarge,
        Error::NoConvergence { .. } => PpStatus::NoConvergence,
        Error::SolverStalled(_) => PpStatus::SolverStalled,
        Error::Invalid(_) | Error::Json(_) | Error::Csv(_) => PpStatus::Invalid,
        Error::Io(_) => PpStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = Result<(), Failure>;

/// Runs `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> FfiResult) -> PpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PpStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PpStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn check_shape(n: usize, dim: usize) -> FfiResult {
    if n > paraprod::dyadic::MAX_RESOLUTION {
        return Err(Error::TooLarge {
            size: n,
            limit: paraprod::dyadic::MAX_RESOLUTION,
        }
        .into());
    }
    if dim == 0 || dim > 4096 {
        return Err(Error::Invalid(format!("N = {dim} outside 1..=4096")).into());
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, or 0 if
/// the last call succeeded. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a function at resolution `n` with `N = dim` from
/// `2 * 2^n * dim^2` interleaved doubles.
///
/// # Safety
/// `values` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_function_new(n: usize, dim: usize, values: *const f64, out_fn: *mut *mut PpFunction) -> PpStatus {
    guard(|| {
        let slot = out(out_fn, "out")?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        check_shape(n, dim)?;
        let count = (1usize << n) * dim * dim;
        let raw = std::slice::from_raw_parts(values, 2 * count);
        let data = raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        *slot = boxed(PpFunction(DyadicMatrixFunction::from_flat(n, dim, data)?));
        Ok(())
    })
}

/// Parses the JSON exchange format `{"n", "N", "values"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_function_from_json(json: *const c_char, out_fn: *mut *mut PpFunction) -> PpStatus {
    guard(|| {
        let slot = out(out_fn, "out")?;
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::Invalid("JSON is not UTF-8".into()))?;
        *slot = boxed(PpFunction(io::function_from_json(text)?));
        Ok(())
    })
}

/// Serializes to JSON; release the string with [`pp_string_free`].
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_function_to_json(f: *const PpFunction, out_str: *mut *mut c_char) -> PpStatus {
    guard(|| {
        let f = deref(f, "function")?;
        let slot = out(out_str, "out")?;
        *slot = CString::new(io::function_to_json(&f.0)).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Seeded random function with Gaussian Haar coefficients, level-decaying
/// when `level_decay` is true.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_function_random(
    seed: u64,
    n: usize,
    dim: usize,
    level_decay: bool,
    out_fn: *mut *mut PpFunction,
) -> PpStatus {
    guard(|| {
        let slot = out(out_fn, "out")?;
        check_shape(n, dim)?;
        let f = random::random_function(&mut random::seeded(seed), n, dim, level_decay);
        *slot = boxed(PpFunction(f));
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle; `n` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_function_shape(f: *const PpFunction, n: *mut usize, dim: *mut usize) -> PpStatus {
    guard(|| {
        let f = deref(f, "function")?;
        *out(n, "n")? = f.0.resolution();
        *out(dim, "dim")? = f.0.dim();
        Ok(())
    })
}

/// Copies the interleaved values into `buf`, which must hold `len >=
/// 2 * 2^n * N^2` doubles.
///
/// # Safety
/// `f` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pp_function_values(f: *const PpFunction, buf: *mut f64, len: usize) -> PpStatus {
    guard(|| {
        let f = deref(f, "function")?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let data = f.0.data();
        if len < 2 * data.len() {
            return Err(Error::ShapeMismatch(format!("buffer holds {len} doubles, need {}", 2 * data.len())).into());
        }
        let buf = std::slice::from_raw_parts_mut(buf, 2 * data.len());
        for (slot, z) in buf.chunks_exact_mut(2).zip(data) {
            slot[0] = z.re;
            slot[1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pp_function_free(f: *mut PpFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Norm of `f`; `p` is read only for [`PpNormKind::Lp`].
///
/// # Safety
/// `f` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_norm(f: *const PpFunction, kind: PpNormKind, p: f64, value: *mut f64) -> PpStatus {
    guard(|| {
        let f = &deref(f, "function")?.0;
        let slot = out(value, "value")?;
        *slot = match kind {
            PpNormKind::BmoC => norms::bmo_norm(f, BmoVariant::Column).value,
            PpNormKind::BmoR => norms::bmo_norm(f, BmoVariant::Row).value,
            PpNormKind::BmoCr => norms::bmo_norm(f, BmoVariant::ColumnRow).value,
            PpNormKind::BmoM => norms::bmo_m_norm(f).value,
            PpNormKind::H1Max => norms::h1_max_norm(f).value,
            PpNormKind::Lp => paraprod::linalg::lp_function_norm(f, p)?,
        };
        Ok(())
    })
}

/// Operator with symbol `phi` (copied).
///
/// # Safety
/// `phi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_new(kind: PpOperatorKind, phi: *const PpFunction, out_op: *mut *mut PpOperator) -> PpStatus {
    guard(|| {
        let phi = deref(phi, "phi")?;
        let slot = out(out_op, "out")?;
        let kind = match kind {
            PpOperatorKind::Paraproduct => OperatorKind::Paraproduct,
            PpOperatorKind::ParaproductAdjoint => OperatorKind::ParaproductAdjoint,
            PpOperatorKind::HaarMultiplier => OperatorKind::HaarMultiplier,
        };
        *slot = boxed(PpOperator(OperatorHandle::new(kind, phi.0.clone())));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_free(op: *mut PpOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

unsafe fn apply_with(
    op: *const PpOperator,
    f: *const PpFunction,
    out_fn: *mut *mut PpFunction,
    adjoint: bool,
) -> PpStatus {
    guard(|| {
        let op = &deref(op, "operator")?.0;
        let f = &deref(f, "function")?.0;
        let slot = out(out_fn, "out")?;
        let g = if adjoint { op.adjoint_apply(f)? } else { op.apply(f)? };
        *slot = boxed(PpFunction(g));
        Ok(())
    })
}

/// # Safety
/// `op` and `f` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_apply(op: *const PpOperator, f: *const PpFunction, out_fn: *mut *mut PpFunction) -> PpStatus {
    apply_with(op, f, out_fn, false)
}

/// # Safety
/// `op` and `f` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_adjoint_apply(
    op: *const PpOperator,
    f: *const PpFunction,
    out_fn: *mut *mut PpFunction,
) -> PpStatus {
    apply_with(op, f, out_fn, true)
}

/// `L^2` operator norm by power iteration. On `NoConvergence` the best
/// estimate is still written to `value`. `iterations` may be null.
///
/// # Safety
/// `op` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_norm_2(
    op: *const PpOperator,
    tol: f64,
    max_iter: usize,
    seed: u64,
    value: *mut f64,
    iterations: *mut usize,
) -> PpStatus {
    guard(|| {
        let op = &deref(op, "operator")?.0;
        let slot = out(value, "value")?;
        let opts = PowerOptions { tol, max_iter, seed };
        match operators::operator_norm_2(op, opts) {
            Ok(est) => {
                *slot = est.value;
                if let Some(it) = iterations.as_mut() {
                    *it = est.iterations;
                }
                Ok(())
            }
            Err(e) => {
                if let Error::NoConvergence { best, iterations: n } = e {
                    *slot = best;
                    if let Some(it) = iterations.as_mut() {
                        *it = n;
                    }
                }
                Err(e.into())
            }
        }
    })
}

/// Certified lower bound for the `L^p` operator norm, `1 < p < inf`.
///
/// # Safety
/// `op` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_operator_norm_p_lower(
    op: *const PpOperator,
    p: f64,
    restarts: usize,
    seed: u64,
    value: *mut f64,
) -> PpStatus {
    guard(|| {
        let op = &deref(op, "operator")?.0;
        let slot = out(value, "value")?;
        let opts = AscentOptions {
            restarts,
            seed,
            ..AscentOptions::default()
        };
        *slot = operators::operator_norm_p_lower(op, p, opts)?;
        Ok(())
    })
}

/// Maximal `L^1` norm of `count` functions of equal shape. With
/// `selfadjoint` false every value must be positive semidefinite. `gap` may
/// be null; otherwise it receives the largest per-atom duality gap.
///
/// # Safety
/// `fns` must point to `count` live handles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_max_norm_l1(
    fns: *const *const PpFunction,
    count: usize,
    selfadjoint: bool,
    tol: f64,
    value: *mut f64,
    gap: *mut f64,
) -> PpStatus {
    guard(|| {
        let slot = out(value, "value")?;
        if fns.is_null() {
            return Err(Failure::Null("functions"));
        }
        let handles = std::slice::from_raw_parts(fns, count);
        let seq: Vec<DyadicMatrixFunction> = handles
            .iter()
            .map(|&h| deref(h, "function").map(|f| f.0.clone()))
            .collect::<Result<_, _>>()?;
        let report = if selfadjoint {
            majorant::max_norm_l1_selfadjoint_tol(&seq, tol)?
        } else {
            majorant::max_norm_l1_positive_tol(&seq, tol)?
        };
        *slot = report.value;
        if let Some(g) = gap.as_mut() {
            *g = report.max_gap;
        }
        Ok(())
    })
}

/// Operator norms of the `N x N` Hilbert matrix and its lower triangle.
///
/// # Safety
/// `h_norm` and `th_norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_hilbert_norms(dim: usize, h_norm: *mut f64, th_norm: *mut f64) -> PpStatus {
    guard(|| {
        let (h, th) = (out(h_norm, "h_norm")?, out(th_norm, "th_norm")?);
        if dim == 0 {
            return Err(Error::Invalid("N must be positive".into()).into());
        }
        let r = constructions::hilbert_norms(dim);
        *h = r.h_norm;
        *th = r.th_norm;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Degenerate("x".into())), PpStatus::Degenerate);
        assert_eq!(status_of(&Error::NotSquare { rows: 1, cols: 2 }), PpStatus::ShapeMismatch);
        let err = Error::NoConvergence { best: 1.0, iterations: 3 };
        assert_eq!(status_of(&err), PpStatus::NoConvergence);
    }

    #[test]
    fn guard_catches_panics() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, PpStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let len = unsafe { pp_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(len > 0);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), PpStatus::Ok);
        assert_eq!(unsafe { pp_last_error_message(ptr::null_mut(), 0) }, 0);
    }
}
