//! C ABI for the `riskbudget` solvers.
//!
//! Every entry point returns an [`RbStatus`]. On failure a description is
//! available from [`rb_last_error_message`] on the same thread. Matrices are
//! passed as dense row-major `n * n` arrays. Panics never cross the boundary;
//! they are reported as [`RbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riskbudget::matrix_lab::generate_correlation;
use riskbudget::{
    risk_contributions, Algorithm, CorrelationMatrix, CovarianceModel, Error, RiskBudgets,
    RiskMeasure, SolveOutcome, SolverSettings, Termination,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotPositiveDefinite = 3,
    Domain = 4,
    Numeric = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbAlgorithm {
    Ccd = 0,
    Newton = 1,
    Jacobi = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbTermination {
    Converged = 0,
    BudgetExhausted = 1,
    Stalled = 2,
    NonPositiveBeta = 3,
    NonPositiveRisk = 4,
    NumericFailure = 5,
}

/// Summary of one solve. Weights are written to a separate caller buffer.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RbSolveResult {
    pub algorithm: RbAlgorithm,
    /// 1 when the convergence gap reached the tolerance, else 0.
    pub converged: i32,
    pub termination: RbTermination,
    pub cycles: usize,
    pub elapsed_seconds: f64,
    pub final_gap: f64,
}

/// Opaque covariance model handle. Free with [`rb_model_free`].
pub struct RbModel {
    inner: CovarianceModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(error: &Error) -> RbStatus {
    match error {
        Error::Dimension { .. } | Error::Input(_) | Error::Io(_) => RbStatus::InvalidInput,
        Error::NotPositiveDefinite { .. } => RbStatus::NotPositiveDefinite,
        Error::Domain { .. } => RbStatus::Domain,
        Error::Numeric(_) => RbStatus::Numeric,
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

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RbStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RbStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            RbStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            RbStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn slice_mut<'a>(
    ptr: *mut f64,
    len: usize,
    what: &'static str,
) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn square_len(n: usize) -> Result<usize, Failure> {
    n.checked_mul(n)
        .filter(|_| n > 0)
        .ok_or_else(|| Failure::Lib(Error::Input(format!("invalid dimension {n}"))))
}

fn into_handle(model: CovarianceModel, out: *mut *mut RbModel) {
    let boxed = Box::new(RbModel { inner: model });
    // SAFETY: the caller checked `out` for null.
    unsafe { *out = Box::into_raw(boxed) };
}

/// Builds a model from a row-major `n * n` covariance matrix.
///
/// # Safety
/// `cov` must point to `n * n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rb_model_from_covariance(
    cov: *const f64,
    n: usize,
    out: *mut *mut RbModel,
) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let values = slice(cov, square_len(n)?, "cov")?;
        into_handle(CovarianceModel::from_covariance_row_major(n, values)?, out);
        Ok(())
    })
}

/// Builds a model from a row-major `n * n` correlation matrix and `n`
/// volatilities.
///
/// # Safety
/// `corr` must point to `n * n` doubles, `vols` to `n`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rb_model_from_correlation(
    corr: *const f64,
    vols: *const f64,
    n: usize,
    out: *mut *mut RbModel,
) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let values = slice(corr, square_len(n)?, "corr")?;
        let vols = slice(vols, n, "vols")?;
        let corr = CorrelationMatrix::from_row_major(n, values)?;
        into_handle(CovarianceModel::new(vols.to_vec(), corr)?, out);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rb_model_free(model: *mut RbModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Number of assets, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_model_dim(model: *const RbModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

fn budgets_from(ptr: *const f64, n: usize) -> Result<RiskBudgets, Failure> {
    if ptr.is_null() {
        Ok(RiskBudgets::uniform(n))
    } else {
        // SAFETY: documented contract of the solve entry points.
        let b = unsafe { std::slice::from_raw_parts(ptr, n) };
        Ok(RiskBudgets::normalized(b.to_vec())?)
    }
}

fn write_outcome(outcome: &SolveOutcome, weights_out: &mut [f64], result_out: *mut RbSolveResult) {
    weights_out.copy_from_slice(outcome.weights.as_slice());
    let result = RbSolveResult {
        algorithm: match outcome.algorithm {
            Algorithm::Ccd => RbAlgorithm::Ccd,
            Algorithm::Newton => RbAlgorithm::Newton,
            Algorithm::Jacobi => RbAlgorithm::Jacobi,
        },
        converged: outcome.converged as i32,
        termination: match outcome.termination {
            Termination::Converged => RbTermination::Converged,
            Termination::BudgetExhausted => RbTermination::BudgetExhausted,
            Termination::Stalled => RbTermination::Stalled,
            Termination::NonPositiveBeta { .. } => RbTermination::NonPositiveBeta,
            Termination::NonPositiveRisk => RbTermination::NonPositiveRisk,
            Termination::Numeric(_) => RbTermination::NumericFailure,
        },
        cycles: outcome.cycles,
        elapsed_seconds: outcome.elapsed_seconds,
        final_gap: outcome.final_gap,
    };
    // SAFETY: null was rejected by the caller.
    unsafe { *result_out = result };
}

fn settings(algorithm: i32, tolerance: f64, max_cycles: usize) -> Result<SolverSettings, Failure> {
    let algorithm = match algorithm {
        x if x == RbAlgorithm::Ccd as i32 => Algorithm::Ccd,
        x if x == RbAlgorithm::Newton as i32 => Algorithm::Newton,
        x if x == RbAlgorithm::Jacobi as i32 => Algorithm::Jacobi,
        other => {
            return Err(Failure::Lib(Error::Input(format!(
                "unknown algorithm code {other} (valid: 0 ccd, 1 newton, 2 jacobi)"
            ))))
        }
    };
    Ok(SolverSettings {
        tolerance,
        max_cycles,
        algorithm,
    })
}

/// Solves for risk-budgeting weights under the volatility measure.
///
/// `budgets` may be null for equal risk contributions; otherwise it holds `n`
/// positive values, rescaled to sum to one. Non-convergence is not an error:
/// the status is `RB_STATUS_OK` and `result_out->converged` is 0.
/// `algorithm` is one of the `RB_ALGORITHM_*` values.
///
/// # Safety
/// `model` must be a live handle, `budgets` null or `n` doubles,
/// `weights_out` room for `n` doubles, `result_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rb_solve(
    model: *const RbModel,
    budgets: *const f64,
    algorithm: i32,
    tolerance: f64,
    max_cycles: usize,
    weights_out: *mut f64,
    result_out: *mut RbSolveResult,
) -> RbStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        if result_out.is_null() {
            return Err(Failure::Null("result_out"));
        }
        let n = model.inner.dim();
        let weights = slice_mut(weights_out, n, "weights_out")?;
        let b = budgets_from(budgets, n)?;
        let outcome = riskbudget::solve(
            &model.inner,
            &b,
            &settings(algorithm, tolerance, max_cycles)?,
            &RiskMeasure::Volatility,
        )?;
        write_outcome(&outcome, weights, result_out);
        Ok(())
    })
}

/// Coordinate descent under the measure `-xᵀμ + c·σ(x)`.
///
/// # Safety
/// As [`rb_solve`]; `mu` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rb_solve_stddev(
    model: *const RbModel,
    budgets: *const f64,
    mu: *const f64,
    c: f64,
    tolerance: f64,
    max_cycles: usize,
    weights_out: *mut f64,
    result_out: *mut RbSolveResult,
) -> RbStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        if result_out.is_null() {
            return Err(Failure::Null("result_out"));
        }
        let n = model.inner.dim();
        let mu = slice(mu, n, "mu")?;
        let weights = slice_mut(weights_out, n, "weights_out")?;
        let b = budgets_from(budgets, n)?;
        let measure = RiskMeasure::std_dev_based(mu.to_vec(), c)?;
        let outcome = riskbudget::solve(
            &model.inner,
            &b,
            &settings(RbAlgorithm::Ccd as i32, tolerance, max_cycles)?,
            &measure,
        )?;
        write_outcome(&outcome, weights, result_out);
        Ok(())
    })
}

/// Normalized volatility risk contributions of `weights`.
///
/// # Safety
/// `model` must be a live handle; `weights` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rb_risk_contributions(
    model: *const RbModel,
    weights: *const f64,
    out: *mut f64,
) -> RbStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        let n = model.inner.dim();
        let x = slice(weights, n, "weights")?;
        let out = slice_mut(out, n, "out")?;
        let rc = risk_contributions(x, &model.inner, &RiskMeasure::Volatility)?;
        out.copy_from_slice(&rc);
        Ok(())
    })
}

/// Writes a seeded random correlation matrix with eigenvalues `2i/(n+1)`,
/// row-major, into `out`.
///
/// # Safety
/// `out` must have room for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rb_generate_correlation(n: usize, seed: u64, out: *mut f64) -> RbStatus {
    guard(|| {
        let out = slice_mut(out, square_len(n)?, "out")?;
        let corr = generate_correlation(n, seed)?;
        out.copy_from_slice(&corr.to_row_major());
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
