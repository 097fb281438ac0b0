//! Jacobi power iteration `x_{k+1} ∝ b / β(x_k)`.
//!
//! The plain iteration is kept as is: no damping or averaging. It diverges or
//! oscillates on many large instances and reports that as non-convergence.

use std::time::Instant;

use crate::error::{check_len, check_positive, Error, Result};
use crate::linalg::dot;
use crate::model::{
    contributions_from_product, gap, Algorithm, CovarianceModel, RiskBudgets, RiskMeasure,
    SolveOutcome, SolverSettings, Termination, Weights,
};
use crate::solution::finish;

/// Iterations without a new best gap before the run is declared stalled.
pub const STALL_WINDOW: usize = 100;

/// `β_i(x) = (Σx)_i / σ²(x)`.
pub fn betas(x: &[f64], cov: &CovarianceModel) -> Result<Vec<f64>> {
    check_len("weights", cov.dim(), x.len())?;
    check_positive("weight", x)?;
    let sx = cov.apply(x);
    Ok(betas_from_product(x, &sx))
}

fn betas_from_product(x: &[f64], sx: &[f64]) -> Vec<f64> {
    let variance = dot(x, sx);
    sx.iter().map(|s| s / variance).collect()
}

fn next_from_betas(beta: &[f64], b: &[f64]) -> std::result::Result<Vec<f64>, usize> {
    if let Some(asset) = beta.iter().position(|v| !(*v > 0.0)) {
        return Err(asset);
    }
    let raw: Vec<f64> = b.iter().zip(beta).map(|(bi, bt)| bi / bt).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / sum).collect())
}

/// One Jacobi step; the result sums to one.
pub fn jacobi_iterate(x: &[f64], cov: &CovarianceModel, b: &RiskBudgets) -> Result<Vec<f64>> {
    check_len("risk budgets", cov.dim(), b.dim())?;
    let beta = betas(x, cov)?;
    next_from_betas(&beta, b.as_slice()).map_err(|asset| {
        Error::Numeric(format!(
            "beta of asset {asset} is {} (must be positive)",
            beta[asset]
        ))
    })
}

pub fn solve_jacobi(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
) -> Result<SolveOutcome> {
    settings.validate()?;
    let n = cov.dim();
    check_len("risk budgets", n, b.dim())?;
    let start = Instant::now();
    let budgets = b.as_slice();

    let mut x = vec![1.0 / n as f64; n];
    let mut sx = cov.apply(&x);
    let mut iteration = 0;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut current;
    let termination;

    loop {
        current = gap(&contributions_from_product(&x, &sx), budgets);
        if current <= settings.tolerance {
            let weights = Weights::from_vec_unchecked(x.clone());
            if let Some(g) = finish(&weights, cov, b, &RiskMeasure::Volatility) {
                if g <= settings.tolerance {
                    return Ok(SolveOutcome {
                        algorithm: Algorithm::Jacobi,
                        weights,
                        converged: true,
                        cycles: iteration,
                        elapsed_seconds: start.elapsed().as_secs_f64(),
                        final_gap: g,
                        termination: Termination::Converged,
                    });
                }
            }
        }
        if current < best {
            best = current;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_WINDOW {
                termination = Termination::Stalled;
                break;
            }
        }
        if iteration >= settings.max_cycles {
            termination = Termination::BudgetExhausted;
            break;
        }
        match next_from_betas(&betas_from_product(&x, &sx), budgets) {
            Ok(next) if next.iter().all(|v| *v > 0.0 && v.is_finite()) => x = next,
            Ok(_) => {
                termination = Termination::Numeric("iterate left the positive orthant".into());
                break;
            }
            Err(asset) => {
                termination = Termination::NonPositiveBeta { asset };
                break;
            }
        }
        sx = cov.apply(&x);
        iteration += 1;
    }

    Ok(SolveOutcome {
        algorithm: Algorithm::Jacobi,
        weights: Weights::from_vec_unchecked(x),
        converged: false,
        cycles: iteration,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_gap: if current.is_finite() {
            current
        } else {
            f64::INFINITY
        },
        termination,
    })
}
