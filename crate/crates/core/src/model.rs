//! Domain types shared by every solver, and the risk-contribution arithmetic
//! used to test convergence.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, check_positive, Error, Result};
use crate::linalg::{dot, sym_matvec, Cholesky};

/// Entries of a correlation matrix may be off-symmetric or off-unit by this much.
pub const MATRIX_TOLERANCE: f64 = 1e-12;

/// Budgets must sum to one within this tolerance.
pub const BUDGET_SUM_TOLERANCE: f64 = 1e-12;

/// Symmetric positive-definite matrix with unit diagonal.
///
/// Positive definiteness is checked once, at construction, with a Cholesky
/// factorization. Stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::Input("correlation matrix is empty".into()));
        }
        check_len("correlation matrix columns", n, matrix.ncols())?;
        check_finite("correlation matrix", matrix.as_slice())?;
        let mut matrix = matrix;
        for i in 0..n {
            if (matrix[(i, i)] - 1.0).abs() > MATRIX_TOLERANCE {
                return Err(Error::Input(format!(
                    "correlation matrix diagonal entry ({i},{i}) is {} instead of 1",
                    matrix[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > MATRIX_TOLERANCE {
                    return Err(Error::Input(format!(
                        "correlation matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let mid = 0.5 * (a + b);
                matrix[(i, j)] = mid;
                matrix[(j, i)] = mid;
            }
        }
        Cholesky::factor(&matrix)?;
        Ok(Self { matrix })
    }

    /// Builds from `n * n` values in row-major order.
    pub fn from_row_major(n: usize, values: &[f64]) -> Result<Self> {
        check_len("correlation matrix entries", n * n, values.len())?;
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Wraps a matrix without validation (tests need singular matrices).
    #[cfg(test)]
    pub(crate) fn from_trusted(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        // Symmetric, so the column-major buffer is also row-major.
        self.matrix.as_slice().to_vec()
    }
}

/// Per-asset volatilities and a correlation matrix; `Σ_ij = σ_i ρ_ij σ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    vols: Vec<f64>,
    corr: CorrelationMatrix,
    covariance: DMatrix<f64>,
}

impl CovarianceModel {
    pub fn new(vols: Vec<f64>, corr: CorrelationMatrix) -> Result<Self> {
        check_len("volatilities", corr.dim(), vols.len())?;
        check_positive("volatility", &vols)?;
        check_finite("volatilities", &vols)?;
        let n = vols.len();
        let covariance = DMatrix::from_fn(n, n, |i, j| vols[i] * corr.get(i, j) * vols[j]);
        Ok(Self {
            vols,
            corr,
            covariance,
        })
    }

    /// Unit volatilities: the covariance is the correlation matrix itself.
    pub fn from_correlation(corr: CorrelationMatrix) -> Self {
        let n = corr.dim();
        Self {
            vols: vec![1.0; n],
            covariance: corr.as_matrix().clone(),
            corr,
        }
    }

    /// Splits a covariance matrix into volatilities and correlations.
    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 {
            return Err(Error::Input("covariance matrix is empty".into()));
        }
        check_len("covariance matrix columns", n, cov.ncols())?;
        check_finite("covariance matrix", cov.as_slice())?;
        let variances: Vec<f64> = (0..n).map(|i| cov[(i, i)]).collect();
        check_positive("variance", &variances)?;
        let vols: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
        let mut corr = DMatrix::from_fn(n, n, |i, j| cov[(i, j)] / (vols[i] * vols[j]));
        for i in 0..n {
            corr[(i, i)] = 1.0;
            for j in 0..i {
                let scale = cov[(i, j)]
                    .abs()
                    .max(cov[(j, i)].abs())
                    .max(f64::MIN_POSITIVE);
                if (cov[(i, j)] - cov[(j, i)]).abs() > MATRIX_TOLERANCE * scale.max(1.0) {
                    return Err(Error::Input(format!(
                        "covariance matrix is not symmetric at ({i},{j})"
                    )));
                }
                let mid = 0.5 * (corr[(i, j)] + corr[(j, i)]);
                corr[(i, j)] = mid;
                corr[(j, i)] = mid;
            }
        }
        Self::new(vols, CorrelationMatrix::new(corr)?)
    }

    /// [`Self::from_covariance`] from `n * n` values in row-major order.
    pub fn from_covariance_row_major(n: usize, values: &[f64]) -> Result<Self> {
        check_len("covariance matrix entries", n * n, values.len())?;
        Self::from_covariance(DMatrix::from_row_slice(n, n, values))
    }

    pub fn dim(&self) -> usize {
        self.vols.len()
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn corr(&self) -> &CorrelationMatrix {
        &self.corr
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    /// The same correlations with unit volatilities.
    pub fn correlation_space(&self) -> Self {
        Self::from_correlation(self.corr.clone())
    }

    /// `Σ x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        sym_matvec(&self.covariance, x)
    }
}

/// Strictly positive risk budgets summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskBudgets(Vec<f64>);

impl RiskBudgets {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Input("risk budgets are empty".into()));
        }
        check_finite("risk budgets", &b)?;
        check_positive("risk budget", &b)?;
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > BUDGET_SUM_TOLERANCE {
            return Err(Error::Input(format!(
                "risk budgets sum to {sum}, expected 1"
            )));
        }
        Ok(Self(b))
    }

    /// Rescales any strictly positive vector to sum to one.
    pub fn normalized(b: Vec<f64>) -> Result<Self> {
        let w = normalize(&b)?;
        Self::new(w.into_vec())
    }

    /// Equal risk contribution: `b_i = 1/n`.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Portfolio weights normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub(crate) fn from_vec_unchecked(x: Vec<f64>) -> Self {
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Risk measure whose contributions are budgeted.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RiskMeasure {
    /// `R(x) = σ(x)`
    #[default]
    Volatility,
    /// `R(x) = −xᵀμ + c·σ(x)`
    StdDevBased { mu: Vec<f64>, c: f64 },
}

impl RiskMeasure {
    pub fn std_dev_based(mu: Vec<f64>, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Input(format!(
                "standard-deviation multiplier c must be positive and finite, got {c}"
            )));
        }
        check_finite("expected returns", &mu)?;
        Ok(Self::StdDevBased { mu, c })
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            RiskMeasure::Volatility => Ok(()),
            RiskMeasure::StdDevBased { mu, c } => {
                check_len("expected returns", n, mu.len())?;
                if !(*c > 0.0) {
                    return Err(Error::Input(format!("c must be positive, got {c}")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ccd,
    Newton,
    Jacobi,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ccd, Algorithm::Newton, Algorithm::Jacobi];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ccd => "ccd",
            Algorithm::Newton => "newton",
            Algorithm::Jacobi => "jacobi",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ccd" => Ok(Algorithm::Ccd),
            "newton" => Ok(Algorithm::Newton),
            "jacobi" => Ok(Algorithm::Jacobi),
            other => Err(Error::Input(format!(
                "unknown algorithm '{other}' (valid: ccd, newton, jacobi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Threshold on `max_i |RC*_i − b_i|`.
    pub tolerance: f64,
    /// Coordinate cycles for CCD, iterations for Newton and Jacobi.
    pub max_cycles: usize,
    pub algorithm: Algorithm,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_cycles: 10_000,
            algorithm: Algorithm::Ccd,
        }
    }
}

impl SolverSettings {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Input(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_cycles == 0 {
            return Err(Error::Input("max_cycles must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why a solve stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    BudgetExhausted,
    /// Jacobi: the gap failed to improve for too many iterations.
    Stalled,
    /// Jacobi: an asset beta became nonpositive.
    NonPositiveBeta {
        asset: usize,
    },
    /// The risk measure was nonpositive at the iterate.
    NonPositiveRisk,
    Numeric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub algorithm: Algorithm,
    /// Normalized weights. Valid RB weights only when `converged` is true.
    pub weights: Weights,
    pub converged: bool,
    pub cycles: usize,
    pub elapsed_seconds: f64,
    pub final_gap: f64,
    pub termination: Termination,
}

fn check_vector(what: &'static str, x: &[f64], n: usize) -> Result<()> {
    check_len(what, n, x.len())?;
    check_finite(what, x)
}

/// `sqrt(xᵀ Σ x)`.
pub fn portfolio_volatility(x: &[f64], cov: &CovarianceModel) -> Result<f64> {
    check_vector("weights", x, cov.dim())?;
    let sx = cov.apply(x);
    Ok(dot(x, &sx).max(0.0).sqrt())
}

/// `RC*_i = x_i (Σx)_i / (xᵀΣx)`: volatility contributions normalized to sum to one.
pub fn normalized_risk_contributions(x: &[f64], cov: &CovarianceModel) -> Result<Vec<f64>> {
    check_vector("weights", x, cov.dim())?;
    check_positive("weight", x)?;
    let sx = cov.apply(x);
    Ok(contributions_from_product(x, &sx))
}

pub(crate) fn contributions_from_product(x: &[f64], sx: &[f64]) -> Vec<f64> {
    let variance = dot(x, sx);
    x.iter()
        .zip(sx)
        .map(|(xi, si)| xi * si / variance)
        .collect()
}

/// Normalized contributions `x_i ∂R/∂x_i / R(x)` for the given risk measure.
///
/// Fails with a domain error when `R(x) ≤ 0`, where the contributions are
/// not meaningful.
pub fn risk_contributions(
    x: &[f64],
    cov: &CovarianceModel,
    measure: &RiskMeasure,
) -> Result<Vec<f64>> {
    match measure {
        RiskMeasure::Volatility => normalized_risk_contributions(x, cov),
        RiskMeasure::StdDevBased { mu, c } => {
            measure.check_dim(cov.dim())?;
            check_vector("weights", x, cov.dim())?;
            check_positive("weight", x)?;
            let sx = cov.apply(x);
            stddev_contributions(x, &sx, mu, *c)
        }
    }
}

pub(crate) fn stddev_contributions(x: &[f64], sx: &[f64], mu: &[f64], c: f64) -> Result<Vec<f64>> {
    let sigma = dot(x, sx).sqrt();
    let rc: Vec<f64> = (0..x.len())
        .map(|i| x[i] * (c * sx[i] / sigma - mu[i]))
        .collect();
    let risk: f64 = rc.iter().sum();
    if !(risk > 0.0) {
        return Err(Error::Domain {
            what: "risk measure",
            index: 0,
            value: risk,
        });
    }
    Ok(rc.into_iter().map(|r| r / risk).collect())
}

pub(crate) fn gap(rc: &[f64], b: &[f64]) -> f64 {
    rc.iter()
        .zip(b)
        .map(|(r, bi)| (r - bi).abs())
        .fold(0.0, f64::max)
}

/// `max_i |RC*_i − b_i|` for the volatility risk measure.
pub fn convergence_gap(x: &[f64], cov: &CovarianceModel, b: &RiskBudgets) -> Result<f64> {
    check_len("risk budgets", cov.dim(), b.dim())?;
    let rc = normalized_risk_contributions(x, cov)?;
    Ok(gap(&rc, b.as_slice()))
}

/// `max_i |RC*_i − b_i|` for an arbitrary risk measure.
pub fn convergence_gap_for(
    x: &[f64],
    cov: &CovarianceModel,
    b: &RiskBudgets,
    measure: &RiskMeasure,
) -> Result<f64> {
    check_len("risk budgets", cov.dim(), b.dim())?;
    let rc = risk_contributions(x, cov, measure)?;
    Ok(gap(&rc, b.as_slice()))
}

/// `y / Σ_j y_j`.
pub fn normalize(y: &[f64]) -> Result<Weights> {
    if y.is_empty() {
        return Err(Error::Input("cannot normalize an empty vector".into()));
    }
    check_finite("vector", y)?;
    check_positive("entry", y)?;
    let sum: f64 = y.iter().sum();
    Ok(Weights(y.iter().map(|v| v / sum).collect()))
}

/// Maps a correlation-space solution back to covariance weights:
/// `x_i = (y_i/σ_i) / Σ_j (y_j/σ_j)`.
pub fn rescale_by_vol(y: &[f64], vols: &[f64]) -> Result<Weights> {
    check_len("volatilities", y.len(), vols.len())?;
    check_positive("volatility", vols)?;
    check_positive("entry", y)?;
    let scaled: Vec<f64> = y.iter().zip(vols).map(|(yi, s)| yi / s).collect();
    normalize(&scaled)
}

/// `Σ_i (x_i(Σx)_i/σ²(x) − b_i)²`, the least-squares risk-contribution residual.
pub fn sqp_residual(x: &[f64], cov: &CovarianceModel, b: &RiskBudgets) -> Result<f64> {
    check_len("risk budgets", cov.dim(), b.dim())?;
    let rc = normalized_risk_contributions(x, cov)?;
    Ok(rc
        .iter()
        .zip(b.as_slice())
        .map(|(r, bi)| (r - bi) * (r - bi))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(rho: f64, s1: f64, s2: f64) -> CovarianceModel {
        let corr = CorrelationMatrix::from_row_major(2, &[1.0, rho, rho, 1.0]).unwrap();
        CovarianceModel::new(vec![s1, s2], corr).unwrap()
    }

    fn three_asset() -> CovarianceModel {
        let corr =
            CorrelationMatrix::from_row_major(3, &[1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0])
                .unwrap();
        CovarianceModel::new(vec![0.1, 0.2, 0.3], corr).unwrap()
    }

    /// Independent dense oracle: explicit double loop over Σ_ij = σ_i ρ_ij σ_j.
    fn dense_rc(x: &[f64], vols: &[f64], rho: &[Vec<f64>]) -> Vec<f64> {
        let n = x.len();
        let mut sx = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                sx[i] += vols[i] * rho[i][j] * vols[j] * x[j];
            }
        }
        let var: f64 = (0..n).map(|i| x[i] * sx[i]).sum();
        (0..n).map(|i| x[i] * sx[i] / var).collect()
    }

    #[test]
    fn volatility_examples() {
        let one = CovarianceModel::new(vec![0.2], CorrelationMatrix::identity(1)).unwrap();
        assert!((portfolio_volatility(&[1.0], &one).unwrap() - 0.2).abs() < 1e-15);
        let perfect = CovarianceModel::new(
            vec![1.0, 1.0],
            CorrelationMatrix::from_trusted(DMatrix::from_element(2, 2, 1.0)),
        )
        .unwrap();
        assert!((portfolio_volatility(&[0.5, 0.5], &perfect).unwrap() - 1.0).abs() < 1e-15);
        let indep = pair(0.0, 1.0, 1.0);
        assert!((portfolio_volatility(&[0.5, 0.5], &indep).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn volatility_rejects_bad_input() {
        let cov = pair(0.0, 1.0, 1.0);
        assert!(matches!(
            portfolio_volatility(&[1.0], &cov),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            portfolio_volatility(&[1.0, f64::NAN], &cov),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn contributions_examples() {
        let n = 5;
        let cov = CovarianceModel::from_correlation(CorrelationMatrix::identity(n));
        let rc = normalized_risk_contributions(&[0.2; 5], &cov).unwrap();
        assert!(rc.iter().all(|r| (r - 0.2).abs() < 1e-15));

        for rho in [-0.5, 0.0, 0.7] {
            let rc = normalized_risk_contributions(&[2.0 / 3.0, 1.0 / 3.0], &pair(rho, 0.1, 0.2))
                .unwrap();
            assert!((rc[0] - 0.5).abs() < 1e-14 && (rc[1] - 0.5).abs() < 1e-14);
        }

        let rho = vec![
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.5],
            vec![0.5, 0.5, 1.0],
        ];
        let x = [1.0 / 3.0; 3];
        let expected = dense_rc(&x, &[0.1, 0.2, 0.3], &rho);
        let rc = normalized_risk_contributions(&x, &three_asset()).unwrap();
        for (a, e) in rc.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-14);
        }
        // Row sums of Σ are (0.035, 0.08, 0.135), total 0.25.
        assert!((rc[0] - 0.14).abs() < 1e-14);
        assert!((rc[1] - 0.32).abs() < 1e-14);
        assert!((rc[2] - 0.54).abs() < 1e-14);
    }

    #[test]
    fn contributions_reject_nonpositive_weight() {
        let cov = pair(0.0, 1.0, 1.0);
        assert!(matches!(
            normalized_risk_contributions(&[1.0, 0.0], &cov),
            Err(Error::Domain { index: 1, .. })
        ));
    }

    #[test]
    fn gap_examples() {
        let cov = pair(0.0, 0.1, 0.2);
        let b = RiskBudgets::uniform(2);
        // Σx = (0.005, 0.02), xᵀΣx = 0.0125, RC* = (0.2, 0.8).
        let g = convergence_gap(&[0.5, 0.5], &cov, &b).unwrap();
        assert!((g - 0.3).abs() < 1e-15);
        let g = convergence_gap(&[2.0 / 3.0, 1.0 / 3.0], &cov, &b).unwrap();
        assert!(g < 1e-15);
        let id = CovarianceModel::from_correlation(CorrelationMatrix::identity(4));
        assert_eq!(
            convergence_gap(&[0.25; 4], &id, &RiskBudgets::uniform(4)).unwrap(),
            0.0
        );
    }

    #[test]
    fn sqp_residual_composes_gaps() {
        let cov = three_asset();
        let b = RiskBudgets::uniform(3);
        let rho = vec![
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.5],
            vec![0.5, 0.5, 1.0],
        ];
        let x = [1.0 / 3.0; 3];
        let expected: f64 = dense_rc(&x, &[0.1, 0.2, 0.3], &rho)
            .iter()
            .map(|r| (r - 1.0 / 3.0).powi(2))
            .sum();
        assert!((sqp_residual(&x, &cov, &b).unwrap() - expected).abs() < 1e-15);
        let id = CovarianceModel::from_correlation(CorrelationMatrix::identity(3));
        assert_eq!(sqp_residual(&x, &id, &b).unwrap(), 0.0);
        let exact = sqp_residual(
            &[2.0 / 3.0, 1.0 / 3.0],
            &pair(0.3, 0.1, 0.2),
            &RiskBudgets::uniform(2),
        );
        assert!(exact.unwrap() <= 1e-15);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(
            normalize(&[1.0, 2.0, 1.0]).unwrap().as_slice(),
            &[0.25, 0.5, 0.25]
        );
        assert_eq!(normalize(&[0.35355; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert!(matches!(normalize(&[1.0, -1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn rescale_examples() {
        let w = rescale_by_vol(&[1.0, 1.0], &[0.1, 0.2]).unwrap();
        assert!((w.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
        let y = [0.3, 0.2, 0.5];
        let same = rescale_by_vol(&y, &[0.4; 3]).unwrap();
        assert!(
            crate::linalg::sup_norm_diff(same.as_slice(), normalize(&y).unwrap().as_slice())
                < 1e-15
        );
        assert!(rescale_by_vol(&y, &[0.4, 0.0, 0.1]).is_err());
        assert!(rescale_by_vol(&y, &[0.4, 0.1]).is_err());
    }

    #[test]
    fn correlation_validation() {
        assert!(CorrelationMatrix::from_row_major(2, &[1.0, 0.2, 0.3, 1.0]).is_err());
        assert!(CorrelationMatrix::from_row_major(2, &[1.1, 0.2, 0.2, 1.0]).is_err());
        match CorrelationMatrix::from_row_major(2, &[1.0, 1.0, 1.0, 1.0]) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn covariance_round_trip() {
        let cov = three_asset();
        let back = CovarianceModel::from_covariance(cov.covariance().clone()).unwrap();
        for (a, b) in back.vols().iter().zip(cov.vols()) {
            assert!((a - b).abs() < 1e-15);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((back.corr().get(i, j) - cov.corr().get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn budgets_validation() {
        assert!(RiskBudgets::new(vec![0.5, 0.5]).is_ok());
        assert!(RiskBudgets::new(vec![0.5, 0.4]).is_err());
        assert!(RiskBudgets::new(vec![1.0, 0.0]).is_err());
        let b = RiskBudgets::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(b.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn measure_validation() {
        assert!(RiskMeasure::std_dev_based(vec![0.0], 0.0).is_err());
        assert!(RiskMeasure::std_dev_based(vec![0.0], -1.0).is_err());
        let m = RiskMeasure::std_dev_based(vec![0.0, 0.1], 2.0).unwrap();
        assert!(m.check_dim(3).is_err());
        assert!(m.check_dim(2).is_ok());
    }

    fn random_model(n: usize, seed: u64) -> CovarianceModel {
        let corr = crate::matrix_lab::generate_correlation(n, seed).unwrap();
        let vols = (0..n)
            .map(|i| 0.05 + 0.02 * ((i * 7 + seed as usize) % 13) as f64)
            .collect();
        CovarianceModel::new(vols, corr).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn contributions_sum_to_one(seed in 0u64..1000, raw in proptest::collection::vec(0.01f64..10.0, 6)) {
            let cov = random_model(6, seed);
            let rc = normalized_risk_contributions(&raw, &cov).unwrap();
            let s: f64 = rc.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn volatility_is_homogeneous(seed in 0u64..1000, raw in proptest::collection::vec(0.01f64..10.0, 5), t in 0.01f64..100.0) {
            let cov = random_model(5, seed);
            let s = portfolio_volatility(&raw, &cov).unwrap();
            let scaled: Vec<f64> = raw.iter().map(|v| v * t).collect();
            let st = portfolio_volatility(&scaled, &cov).unwrap();
            prop_assert!((st - t * s).abs() <= 1e-12 * t * s);
        }

        #[test]
        fn normalize_preserves_ratios(raw in proptest::collection::vec(0.001f64..1e3, 1..12)) {
            let w = normalize(&raw).unwrap();
            prop_assert!(w.as_slice().iter().all(|v| *v > 0.0));
            prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 1..raw.len() {
                let lhs = w.as_slice()[i] / w.as_slice()[0];
                prop_assert!((lhs - raw[i] / raw[0]).abs() <= 1e-12 * (raw[i] / raw[0]));
            }
            let again = normalize(w.as_slice()).unwrap();
            prop_assert!(crate::linalg::sup_norm_diff(again.as_slice(), w.as_slice()) < 1e-15);
        }

        #[test]
        fn gap_zero_iff_residual_zero(seed in 0u64..1000, raw in proptest::collection::vec(0.01f64..10.0, 4)) {
            let cov = random_model(4, seed);
            let b = RiskBudgets::uniform(4);
            let g = convergence_gap(&raw, &cov, &b).unwrap();
            let r = sqp_residual(&raw, &cov, &b).unwrap();
            // max² ≤ Σ squares ≤ n·max²
            prop_assert!(g * g <= r * (1.0 + 1e-12) + 1e-300);
            prop_assert!(r <= 4.0 * g * g * (1.0 + 1e-12) + 1e-300);
        }
    }
}
