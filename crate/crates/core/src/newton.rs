//! Newton's method for the self-concordant risk budgeting objective
//! `f(y) = ½ yᵀCy − Σ b_i ln y_i` on the open positive orthant.
//!
//! Far from the minimizer the step is damped by `1/(1 + decrement)`; once the
//! decrement falls below `β` the full Newton step is taken. Newton
//! directions come from a Cholesky solve of the Hessian system, never from
//! an explicit inverse.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{check_len, check_positive, Error, Result};
use crate::linalg::{dot, sym_matvec, Cholesky};
use crate::model::{
    contributions_from_product, gap, rescale_by_vol, Algorithm, CorrelationMatrix, CovarianceModel,
    RiskBudgets, RiskMeasure, SolveOutcome, SolverSettings, Termination,
};
use crate::solution::finish;

/// Maximum halvings of a step that would leave the positive orthant.
pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecrementKind {
    /// `λ_f(y) = sqrt(∇fᵀ [∇²f]⁻¹ ∇f)`
    LambdaF,
    /// `δ_f(y) = ‖Δy / y‖_∞`, cheaper and scale-free.
    #[default]
    DeltaF,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConstants {
    /// Radius of the quadratic convergence region, `(3 − √5)/2`.
    pub lambda_star: f64,
    /// Damped/full step threshold.
    pub beta: f64,
    pub decrement_kind: DecrementKind,
    pub max_iterations: usize,
}

impl Default for NewtonConstants {
    fn default() -> Self {
        let lambda_star = (3.0 - 5f64.sqrt()) / 2.0;
        Self {
            lambda_star,
            beta: 0.95 * lambda_star,
            decrement_kind: DecrementKind::DeltaF,
            max_iterations: 500,
        }
    }
}

impl NewtonConstants {
    pub fn with_decrement(kind: DecrementKind) -> Self {
        Self {
            decrement_kind: kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta && self.beta < self.lambda_star && self.lambda_star < 1.0) {
            return Err(Error::Input(format!(
                "Newton constants must satisfy 0 < beta < lambda_star < 1 (beta {}, lambda_star {})",
                self.beta, self.lambda_star
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Input(
                "Newton iteration budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Damped,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonState {
    pub y: Vec<f64>,
    pub iteration: usize,
    pub phase: Phase,
}

impl NewtonState {
    /// Scaled equal weights `y_0 = (1ᵀC1)^{−1/2} · 1`.
    pub fn initial(c: &CorrelationMatrix) -> Self {
        let n = c.dim();
        let total: f64 = c.as_matrix().iter().sum();
        Self {
            y: vec![total.sqrt().recip(); n],
            iteration: 0,
            phase: Phase::Damped,
        }
    }
}

fn check_point(y: &[f64], c: &CorrelationMatrix, b: &RiskBudgets) -> Result<()> {
    check_len("iterate", c.dim(), y.len())?;
    check_len("risk budgets", c.dim(), b.dim())?;
    check_positive("iterate", y)
}

pub fn objective(y: &[f64], c: &CorrelationMatrix, b: &RiskBudgets) -> Result<f64> {
    check_point(y, c, b)?;
    let cy = sym_matvec(c.as_matrix(), y);
    Ok(objective_from_product(y, &cy, b.as_slice()))
}

fn objective_from_product(y: &[f64], cy: &[f64], b: &[f64]) -> f64 {
    let barrier: f64 = y.iter().zip(b).map(|(yi, bi)| bi * yi.ln()).sum();
    0.5 * dot(y, cy) - barrier
}

/// `Cy − b/y`.
pub fn gradient(y: &[f64], c: &CorrelationMatrix, b: &RiskBudgets) -> Result<Vec<f64>> {
    check_point(y, c, b)?;
    let cy = sym_matvec(c.as_matrix(), y);
    Ok(gradient_from_product(y, &cy, b.as_slice()))
}

fn gradient_from_product(y: &[f64], cy: &[f64], b: &[f64]) -> Vec<f64> {
    cy.iter()
        .zip(y.iter().zip(b))
        .map(|(ci, (yi, bi))| ci - bi / yi)
        .collect()
}

fn barrier_curvature(y: &[f64], b: &[f64]) -> Vec<f64> {
    y.iter().zip(b).map(|(yi, bi)| bi / (yi * yi)).collect()
}

/// `C + diag(b/y²)`.
pub fn hessian(y: &[f64], c: &CorrelationMatrix, b: &RiskBudgets) -> Result<DMatrix<f64>> {
    check_point(y, c, b)?;
    let mut h = c.as_matrix().clone();
    for (i, d) in barrier_curvature(y, b.as_slice()).into_iter().enumerate() {
        h[(i, i)] += d;
    }
    Ok(h)
}

/// Newton direction `Δ = H⁻¹g` and decrement `λ_f = sqrt(gᵀΔ)`.
pub fn newton_direction(
    y: &[f64],
    c: &CorrelationMatrix,
    b: &RiskBudgets,
) -> Result<(Vec<f64>, f64)> {
    check_point(y, c, b)?;
    let cy = sym_matvec(c.as_matrix(), y);
    let g = gradient_from_product(y, &cy, b.as_slice());
    direction_from_gradient(y, &g, c, b.as_slice())
}

fn direction_from_gradient(
    y: &[f64],
    g: &[f64],
    c: &CorrelationMatrix,
    b: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let shift = barrier_curvature(y, b);
    let chol = Cholesky::factor_shifted(c.as_matrix(), Some(&shift))
        .map_err(|e| Error::Numeric(format!("Newton system could not be factorized: {e}")))?;
    let delta = chol.solve(g);
    let lambda = dot(g, &delta).max(0.0).sqrt();
    Ok((delta, lambda))
}

/// `‖Δ / y‖_∞`.
pub fn proxy_decrement(delta: &[f64], y: &[f64]) -> f64 {
    delta
        .iter()
        .zip(y)
        .map(|(d, yi)| (d / yi).abs())
        .fold(0.0, f64::max)
}

/// What one Newton iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    /// Decrement measured at the starting point of the step.
    pub decrement: f64,
    pub phase: Phase,
    /// Fraction of `Δ` applied, after any positivity halvings.
    pub step_size: f64,
    pub objective_before: f64,
    pub objective_after: f64,
}

fn select_phase(current: Phase, decrement: f64, constants: &NewtonConstants) -> Phase {
    match current {
        Phase::Damped if decrement < constants.beta => Phase::Quadratic,
        Phase::Damped => Phase::Damped,
        // Rounding pathology: fall back rather than fail.
        Phase::Quadratic if decrement > constants.lambda_star => Phase::Damped,
        Phase::Quadratic => Phase::Quadratic,
    }
}

fn take_step(
    state: &NewtonState,
    g: &[f64],
    c: &CorrelationMatrix,
    b: &[f64],
    constants: &NewtonConstants,
) -> Result<(NewtonState, f64, f64)> {
    let y = &state.y;
    let (delta, lambda_f) = direction_from_gradient(y, g, c, b)?;
    let decrement = match constants.decrement_kind {
        DecrementKind::LambdaF => lambda_f,
        DecrementKind::DeltaF => proxy_decrement(&delta, y),
    };
    let phase = select_phase(state.phase, decrement, constants);
    let mut t = match phase {
        Phase::Damped => 1.0 / (1.0 + decrement),
        Phase::Quadratic => 1.0,
    };
    let mut halvings = 0;
    let next = loop {
        let candidate: Vec<f64> = y.iter().zip(&delta).map(|(yi, di)| yi - t * di).collect();
        if candidate.iter().all(|v| *v > 0.0 && v.is_finite()) {
            break candidate;
        }
        halvings += 1;
        if halvings > MAX_HALVINGS {
            return Err(Error::Numeric(
                "Newton step could not be kept inside the positive orthant".into(),
            ));
        }
        t *= 0.5;
    };
    Ok((
        NewtonState {
            y: next,
            iteration: state.iteration + 1,
            phase,
        },
        decrement,
        t,
    ))
}

/// One damped or full Newton step from `state`.
pub fn newton_iterate(
    state: &NewtonState,
    c: &CorrelationMatrix,
    b: &RiskBudgets,
    constants: &NewtonConstants,
) -> Result<NewtonState> {
    check_point(&state.y, c, b)?;
    let cy = sym_matvec(c.as_matrix(), &state.y);
    let g = gradient_from_product(&state.y, &cy, b.as_slice());
    take_step(state, &g, c, b.as_slice(), constants).map(|(s, _, _)| s)
}

/// Solves the risk budgeting problem on the correlation matrix and rescales
/// the solution by the volatilities.
pub fn solve_newton(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
    constants: &NewtonConstants,
) -> Result<SolveOutcome> {
    solve_newton_traced(cov, b, settings, constants, |_| {})
}

/// [`solve_newton`] that reports every step to `on_step`.
pub fn solve_newton_traced(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
    constants: &NewtonConstants,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<SolveOutcome> {
    settings.validate()?;
    constants.validate()?;
    check_len("risk budgets", cov.dim(), b.dim())?;
    let start = Instant::now();
    let c = cov.corr();
    let budgets = b.as_slice();
    let budget = settings.max_cycles.min(constants.max_iterations);

    let mut state = NewtonState::initial(c);
    let mut cy = sym_matvec(c.as_matrix(), &state.y);
    let mut termination = Termination::BudgetExhausted;
    let mut last_gap;

    loop {
        last_gap = gap(&contributions_from_product(&state.y, &cy), budgets);
        if last_gap <= settings.tolerance {
            let weights = rescale_by_vol(&state.y, cov.vols())?;
            if let Some(g) = finish(&weights, cov, b, &RiskMeasure::Volatility) {
                if g <= settings.tolerance {
                    return Ok(SolveOutcome {
                        algorithm: Algorithm::Newton,
                        weights,
                        converged: true,
                        cycles: state.iteration,
                        elapsed_seconds: start.elapsed().as_secs_f64(),
                        final_gap: g,
                        termination: Termination::Converged,
                    });
                }
                last_gap = g;
            }
        }
        if state.iteration >= budget {
            break;
        }
        let grad = gradient_from_product(&state.y, &cy, budgets);
        let before = objective_from_product(&state.y, &cy, budgets);
        let (next, decrement, step_size) = match take_step(&state, &grad, c, budgets, constants) {
            Ok(step) => step,
            Err(e) => {
                termination = Termination::Numeric(e.to_string());
                break;
            }
        };
        cy = sym_matvec(c.as_matrix(), &next.y);
        on_step(&StepRecord {
            iteration: state.iteration,
            decrement,
            phase: next.phase,
            step_size,
            objective_before: before,
            objective_after: objective_from_product(&next.y, &cy, budgets),
        });
        state = next;
    }

    let weights = rescale_by_vol(&state.y, cov.vols())?;
    let final_gap = finish(&weights, cov, b, &RiskMeasure::Volatility).unwrap_or(last_gap);
    Ok(SolveOutcome {
        algorithm: Algorithm::Newton,
        weights,
        converged: false,
        cycles: state.iteration,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_gap,
        termination,
    })
}
