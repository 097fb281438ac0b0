//! Risk budgeting (risk parity) portfolios.
//!
//! Given a covariance model `Σ` and strictly positive budgets `b` summing to
//! one, find long-only weights `x` whose normalized risk contributions
//! `x_i (Σx)_i / xᵀΣx` equal `b_i`. Three solvers are provided:
//!
//! - [`ccd::solve_ccd`]: cyclical coordinate descent with O(n) cache updates,
//!   also for the standard-deviation-based measure `−xᵀμ + c·σ(x)`;
//! - [`newton::solve_newton`]: damped/full Newton on the self-concordant
//!   log-barrier objective, with Cholesky-based steps;
//! - [`jacobi::solve_jacobi`]: the Jacobi power iteration on asset betas.
//!
//! [`matrix_lab`] generates random correlation matrices with prescribed
//! spectra, and [`bench`] runs timing studies over them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod ccd;
pub mod error;
pub mod io;
pub mod jacobi;
pub mod linalg;
pub mod matrix_lab;
pub mod model;
pub mod newton;
mod solution;

pub use error::{Error, Result};
pub use model::{
    convergence_gap, convergence_gap_for, normalize, normalized_risk_contributions,
    portfolio_volatility, rescale_by_vol, risk_contributions, sqp_residual, Algorithm,
    CorrelationMatrix, CovarianceModel, RiskBudgets, RiskMeasure, SolveOutcome, SolverSettings,
    Termination, Weights,
};

/// Runs the solver selected by `settings.algorithm`.
///
/// Newton and Jacobi support only the volatility risk measure.
pub fn solve(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
    measure: &RiskMeasure,
) -> Result<SolveOutcome> {
    match (settings.algorithm, measure) {
        (Algorithm::Ccd, _) => ccd::solve_ccd(cov, b, settings, measure),
        (Algorithm::Newton, RiskMeasure::Volatility) => {
            newton::solve_newton(cov, b, settings, &newton::NewtonConstants::default())
        }
        (Algorithm::Jacobi, RiskMeasure::Volatility) => jacobi::solve_jacobi(cov, b, settings),
        (algorithm, RiskMeasure::StdDevBased { .. }) => Err(Error::Input(format!(
            "{algorithm} supports only the volatility risk measure; use ccd"
        ))),
    }
}
