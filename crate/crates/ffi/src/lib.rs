//! C ABI for `poskq`.
//!
//! Kernels and pool problems live behind opaque handles created by
//! `*_new` functions and released by the matching `*_free`. Every entry
//! point returns a [`PoskqStatus`]; on failure a description is available
//! from [`poskq_last_error_message`] on the same thread. Panics never cross
//! the boundary: they are caught and reported as `POSKQ_STATUS_PANIC`.
//!
//! Point arrays are row-major, `n * dim` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use poskq::quadrature::{cqp_best_effort, cqp_quadrature, fw_quadrature, StepRule};
use poskq::{hull_distance, Error, KernelSpec, PointSet, PoolProblem, QpStatus, TargetOracle};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoskqStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Arguments were rejected (sizes, ranges, non-finite values).
    InvalidInput = 2,
    /// The solver stopped before certifying its tolerance; outputs hold
    /// the best iterate found.
    NotConverged = 3,
    /// The operation is not defined for this kernel or target.
    Unsupported = 4,
    /// A numerical precondition failed (e.g. an indefinite matrix).
    Numerical = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Opaque kernel handle.
pub struct PoskqKernel {
    spec: KernelSpec,
}

/// Opaque pool problem: Gram matrix, kernel means and embedding norm of a
/// fixed candidate pool.
pub struct PoskqProblem {
    problem: PoolProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PoskqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::BudgetExceeded { .. } | Error::Stalled { .. } => PoskqStatus::NotConverged,
            Error::Unsupported(_) => PoskqStatus::Unsupported,
            Error::NegativeCurvature(_) => PoskqStatus::Numerical,
            _ => PoskqStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PoskqStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(PoskqStatus::InvalidInput, message.into())
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PoskqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PoskqStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {message}"));
            PoskqStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `ptr`.
    Ok(unsafe { slice::from_raw_parts(ptr, len) })
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` writable doubles at `ptr`.
    Ok(unsafe { slice::from_raw_parts_mut(ptr, len) })
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles come from the matching constructor.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle pointer"));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn point_set(coords: &[f64], n: usize, dim: usize) -> Result<PointSet, Failure> {
    let points = PointSet::new(dim, coords.to_vec())?;
    if points.len() != n {
        return Err(invalid("point count does not match the coordinate array"));
    }
    Ok(points)
}

/// Message of the last failed call on this thread, or NULL if none. The
/// string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn poskq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn poskq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Periodic Sobolev kernel of smoothness `s >= 1` on `[0,1)^dim`.
///
/// # Safety
/// `out` must be NULL or point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_sobolev_new(dim: usize, smoothness: u32, out: *mut *mut PoskqKernel) -> PoskqStatus {
    guard(|| store(out, PoskqKernel { spec: KernelSpec::periodic_sobolev(dim, smoothness)? }))
}

/// Gaussian (RBF) kernel with the given lengthscale on `R^dim`.
///
/// # Safety
/// `out` must be NULL or point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_rbf_new(dim: usize, lengthscale: f64, out: *mut *mut PoskqKernel) -> PoskqStatus {
    guard(|| store(out, PoskqKernel { spec: KernelSpec::rbf(dim, lengthscale)? }))
}

/// Releases a kernel; NULL is ignored.
///
/// # Safety
/// `kernel` must be NULL or a handle from a kernel constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_free(kernel: *mut PoskqKernel) {
    if !kernel.is_null() {
        // SAFETY: created by Box::into_raw in `store`.
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Point dimension of a kernel (0 for NULL).
///
/// # Safety
/// `kernel` must be NULL or a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_dim(kernel: *const PoskqKernel) -> usize {
    // SAFETY: see above.
    unsafe { kernel.as_ref() }.map_or(0, |k| k.spec.dim())
}

/// `k(x, y)` for two points of the kernel's dimension.
///
/// # Safety
/// `x` and `y` must each hold `dim` doubles; `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_eval(
    kernel: *const PoskqKernel,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> PoskqStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        let dim = k.spec.dim();
        let (x, y) = unsafe { (input(x, dim, "x")?, input(y, dim, "y")?) };
        let out = unsafe { output(out, 1, "out") }?;
        out[0] = k.spec.eval(x, y)?;
        Ok(())
    })
}

/// `sup_x k(x, x)` bound used by the theory (`1` for RBF).
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn poskq_kernel_diagonal_bound(kernel: *const PoskqKernel, out: *mut f64) -> PoskqStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        unsafe { output(out, 1, "out") }?[0] = k.spec.diagonal_bound();
        Ok(())
    })
}

/// Pool problem for the uniform measure on the torus (Sobolev kernels
/// only). `points` holds `n * dim` coordinates in `[0,1)`.
///
/// # Safety
/// `points` must hold `n * dim` doubles; `out` one writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn poskq_problem_uniform_torus(
    kernel: *const PoskqKernel,
    points: *const f64,
    n: usize,
    out: *mut *mut PoskqProblem,
) -> PoskqStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        let dim = k.spec.dim();
        let coords = unsafe { input(points, n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?, "points") }?;
        let pool = point_set(coords, n, dim)?;
        let oracle = TargetOracle::uniform_torus(k.spec.clone())?;
        store(out, PoskqProblem { problem: oracle.try_build_pool_problem(&pool)? })
    })
}

/// Pool problem for the uniform empirical measure on `m` support points.
///
/// # Safety
/// `pool` must hold `n * dim` doubles, `support` `m * dim` doubles; `out`
/// one writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn poskq_problem_empirical(
    kernel: *const PoskqKernel,
    pool: *const f64,
    n: usize,
    support: *const f64,
    m: usize,
    out: *mut *mut PoskqProblem,
) -> PoskqStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        let dim = k.spec.dim();
        let overflow = || invalid("point count * dim overflows");
        let pool_coords = unsafe { input(pool, n.checked_mul(dim).ok_or_else(overflow)?, "pool") }?;
        let support_coords = unsafe { input(support, m.checked_mul(dim).ok_or_else(overflow)?, "support") }?;
        let pool = point_set(pool_coords, n, dim)?;
        let oracle = TargetOracle::empirical(point_set(support_coords, m, dim)?, k.spec.clone())?;
        store(out, PoskqProblem { problem: oracle.try_build_pool_problem(&pool)? })
    })
}

/// Releases a problem; NULL is ignored.
///
/// # Safety
/// `problem` must be NULL or a handle from a problem constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn poskq_problem_free(problem: *mut PoskqProblem) {
    if !problem.is_null() {
        // SAFETY: created by Box::into_raw in `store`.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Pool size of a problem (0 for NULL).
///
/// # Safety
/// `problem` must be NULL or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn poskq_problem_len(problem: *const PoskqProblem) -> usize {
    // SAFETY: see above.
    unsafe { problem.as_ref() }.map_or(0, |p| p.problem.len())
}

/// Frank-Wolfe weights after `iterations >= 0` steps, fixed step `2/(t+2)`
/// or exact line search. Writes `len` weights.
///
/// # Safety
/// `weights` must hold `poskq_problem_len(problem)` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn poskq_fw_weights(
    problem: *const PoskqProblem,
    iterations: i64,
    line_search: bool,
    weights: *mut f64,
) -> PoskqStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem") }?.problem;
        let iterations = usize::try_from(iterations).map_err(|_| invalid("iterations must be nonnegative"))?;
        let out = unsafe { output(weights, p.len(), "weights") }?;
        let rule = if line_search { StepRule::LineSearch } else { StepRule::Fixed };
        out.copy_from_slice(fw_quadrature(p, iterations, rule).as_slice());
        Ok(())
    })
}

/// Pool-optimal simplex weights. `gap` (may be NULL) receives the duality
/// gap certificate. On `POSKQ_STATUS_NOT_CONVERGED` the outputs hold the
/// best iterate.
///
/// # Safety
/// `weights` must hold `poskq_problem_len(problem)` writable doubles; `gap`
/// must be NULL or point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn poskq_cqp_weights(problem: *const PoskqProblem, weights: *mut f64, gap: *mut f64) -> PoskqStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem") }?.problem;
        let out = unsafe { output(weights, p.len(), "weights") }?;
        let result = cqp_quadrature(p);
        let message = result.as_ref().err().map(|e| e.to_string());
        let (w, status) = cqp_best_effort(result)?;
        out.copy_from_slice(w.as_slice());
        if !gap.is_null() {
            // SAFETY: checked non-null; caller provides one double.
            unsafe { *gap = w.gap().unwrap_or(f64::NAN) };
        }
        match status {
            QpStatus::Converged => Ok(()),
            _ => Err(Failure(PoskqStatus::NotConverged, message.unwrap_or_default())),
        }
    })
}

/// Worst-case error of arbitrary `weights` (length `len`) on the pool.
///
/// # Safety
/// `weights` must hold `poskq_problem_len(problem)` doubles; `out` one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn poskq_wce(problem: *const PoskqProblem, weights: *const f64, out: *mut f64) -> PoskqStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem") }?.problem;
        let w = unsafe { input(weights, p.len(), "weights") }?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(invalid("weights must be finite"));
        }
        unsafe { output(out, 1, "out") }?[0] = p.wce_sq_raw(w)?.max(0.0).sqrt();
        Ok(())
    })
}

/// Euclidean distance from `target` (`dim` doubles) to the convex hull of
/// `n` points. `weights` (may be NULL) receives the `n` convex weights.
///
/// # Safety
/// `points` must hold `n * dim` doubles, `target` `dim`; `distance` one
/// writable double; `weights` NULL or `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn poskq_hull_distance(
    points: *const f64,
    n: usize,
    dim: usize,
    target: *const f64,
    distance: *mut f64,
    weights: *mut f64,
) -> PoskqStatus {
    guard(|| {
        let coords = unsafe { input(points, n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?, "points") }?;
        let target = unsafe { input(target, dim, "target") }?;
        let dist_out = unsafe { output(distance, 1, "distance") }?;
        let pts = point_set(coords, n, dim)?;
        let (d, w) = hull_distance(&pts, target, poskq::theory::HULL_GAP_TOLERANCE)?;
        dist_out[0] = d;
        if !weights.is_null() {
            unsafe { output(weights, n, "weights") }?.copy_from_slice(&w);
        }
        Ok(())
    })
}
