//! Shared end-of-solve bookkeeping.

use crate::model::{
    convergence_gap, convergence_gap_for, CovarianceModel, RiskBudgets, RiskMeasure, Weights,
};

/// Gap of normalized weights against the original model; `None` when the
/// contributions are undefined (nonpositive weight or nonpositive risk).
pub(crate) fn finish(
    weights: &Weights,
    cov: &CovarianceModel,
    b: &RiskBudgets,
    measure: &RiskMeasure,
) -> Option<f64> {
    let x = weights.as_slice();
    match measure {
        RiskMeasure::Volatility => convergence_gap(x, cov, b).ok(),
        _ => convergence_gap_for(x, cov, b, measure).ok(),
    }
}
