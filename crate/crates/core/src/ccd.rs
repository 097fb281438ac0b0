//! Cyclical coordinate descent for risk budgeting.
//!
//! Each coordinate update takes the positive root of the scalar quadratic
//! obtained from the first-order condition `x_i (Σx)_i = b_i σ(x)` with the
//! other weights held fixed. `Σx` and `σ(x)` are carried in a [`CcdState`]
//! and updated in O(n) per coordinate, so a full cycle costs one pass over
//! the matrix.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{check_len, check_positive, Error, Result};
use crate::linalg::{dot, sym_matvec};
use crate::model::{
    contributions_from_product, gap, normalize, stddev_contributions, Algorithm, CovarianceModel,
    RiskBudgets, RiskMeasure, SolveOutcome, SolverSettings, Termination, Weights,
};
use crate::solution::finish;

/// Caches are recomputed densely every this many cycles.
pub const REFRESH_EVERY: usize = 50;

/// Unnormalized iterate with cached `Σx` and `σ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdState {
    x: Vec<f64>,
    sigma_x: Vec<f64>,
    sigma_port: f64,
    cycle: usize,
}

impl CcdState {
    pub fn new(x: Vec<f64>, cov: &CovarianceModel) -> Result<Self> {
        Self::with_matrix(x, cov.covariance())
    }

    /// `x_i = 1/n`.
    pub fn equal_weighted(cov: &CovarianceModel) -> Self {
        let n = cov.dim();
        Self::with_matrix(vec![1.0 / n as f64; n], cov.covariance())
            .expect("equal weights are positive")
    }

    fn with_matrix(x: Vec<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        check_len("weights", sigma.nrows(), x.len())?;
        check_positive("weight", &x)?;
        let mut state = Self {
            sigma_x: Vec::new(),
            sigma_port: 0.0,
            x,
            cycle: 0,
        };
        state.refresh_with(sigma);
        Ok(state)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Cached `Σx`.
    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    /// Cached `σ(x)`.
    pub fn sigma_port(&self) -> f64 {
        self.sigma_port
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    /// Recomputes both caches from scratch.
    pub fn refresh(&mut self, cov: &CovarianceModel) {
        self.refresh_with(cov.covariance());
    }

    fn refresh_with(&mut self, sigma: &DMatrix<f64>) {
        self.sigma_x = sym_matvec(sigma, &self.x);
        self.sigma_port = dot(&self.x, &self.sigma_x).max(0.0).sqrt();
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.x.len() {
            return Err(Error::Input(format!(
                "asset index {i} out of range for {} assets",
                self.x.len()
            )));
        }
        Ok(())
    }
}

/// Positive root of `v t² + a t − b_i σ(x) = 0`, where `v = Σ_ii` and
/// `a = (Σx)_i − x_i Σ_ii` is the cross term from the other assets.
pub fn ccd_update_weight(
    i: usize,
    state: &CcdState,
    cov: &CovarianceModel,
    b: &RiskBudgets,
) -> Result<f64> {
    state.check_index(i)?;
    check_len("risk budgets", cov.dim(), b.dim())?;
    let root = volatility_root(i, state, cov.variance(i), b.as_slice()[i]);
    finite_root(i, root)
}

/// Coordinate update for `R(x) = −xᵀμ + c·σ(x)`: positive root of
/// `c v t² + (c a − μ_i σ(x)) t − b_i σ(x) = 0`.
pub fn ccd_update_weight_stddev(
    i: usize,
    state: &CcdState,
    cov: &CovarianceModel,
    b: &RiskBudgets,
    measure: &RiskMeasure,
) -> Result<f64> {
    state.check_index(i)?;
    check_len("risk budgets", cov.dim(), b.dim())?;
    match measure {
        RiskMeasure::StdDevBased { mu, c } => {
            measure.check_dim(cov.dim())?;
            let root = stddev_root(i, state, cov.variance(i), b.as_slice()[i], mu[i], *c);
            finite_root(i, root)
        }
        RiskMeasure::Volatility => Err(Error::Input(
            "standard-deviation update requires a StdDevBased risk measure".into(),
        )),
    }
}

fn finite_root(i: usize, root: f64) -> Result<f64> {
    if root.is_finite() && root > 0.0 {
        Ok(root)
    } else {
        Err(Error::Numeric(format!(
            "coordinate update for asset {i} produced {root}"
        )))
    }
}

#[inline]
fn volatility_root(i: usize, state: &CcdState, var_i: f64, b_i: f64) -> f64 {
    let cross = state.sigma_x[i] - state.x[i] * var_i;
    let disc = cross * cross + 4.0 * var_i * b_i * state.sigma_port;
    (disc.sqrt() - cross) / (2.0 * var_i)
}

#[inline]
fn stddev_root(i: usize, state: &CcdState, var_i: f64, b_i: f64, mu_i: f64, c: f64) -> f64 {
    let cross = state.sigma_x[i] - state.x[i] * var_i;
    let linear = c * cross - mu_i * state.sigma_port;
    let disc = linear * linear + 4.0 * c * b_i * var_i * state.sigma_port;
    (disc.sqrt() - linear) / (2.0 * c * var_i)
}

/// Sets `x_i ← new_xi` and updates the caches incrementally:
/// `Σx̃ = Σx + Σ_{.,i}(x̃_i − x_i)` and
/// `σ²(x̃) = σ²(x) − 2x_i(Σx)_i + x_i²Σ_ii + 2x̃_i(Σx̃)_i − x̃_i²Σ_ii`.
///
/// A negative radicand (rounding drift) falls back to a dense refresh.
pub fn apply_update(
    i: usize,
    new_xi: f64,
    state: &mut CcdState,
    cov: &CovarianceModel,
) -> Result<()> {
    state.check_index(i)?;
    if !(new_xi > 0.0) || !new_xi.is_finite() {
        return Err(Error::Domain {
            what: "updated weight",
            index: i,
            value: new_xi,
        });
    }
    update_caches(i, new_xi, state, cov.covariance());
    Ok(())
}

#[inline]
fn update_caches(i: usize, new_xi: f64, state: &mut CcdState, sigma: &DMatrix<f64>) {
    let old_xi = state.x[i];
    let var_i = sigma[(i, i)];
    let old_row = state.sigma_x[i];
    let delta = new_xi - old_xi;
    if delta != 0.0 {
        let column = sigma.column(i);
        for (s, c) in state.sigma_x.iter_mut().zip(column.as_slice()) {
            *s += c * delta;
        }
    }
    state.x[i] = new_xi;
    let new_row = state.sigma_x[i];
    let radicand = state.sigma_port * state.sigma_port - 2.0 * old_xi * old_row
        + old_xi * old_xi * var_i
        + 2.0 * new_xi * new_row
        - new_xi * new_xi * var_i;
    if radicand > 0.0 {
        state.sigma_port = radicand.sqrt();
    } else {
        state.refresh_with(sigma);
    }
}

/// Runs one full ascending cycle of coordinate updates.
fn run_cycle(
    state: &mut CcdState,
    sigma: &DMatrix<f64>,
    b: &[f64],
    stddev: Option<(&[f64], f64)>,
) -> Result<()> {
    for i in 0..state.x.len() {
        let var_i = sigma[(i, i)];
        let root = match stddev {
            None => volatility_root(i, state, var_i, b[i]),
            Some((mu, c)) => stddev_root(i, state, var_i, b[i], mu[i], c),
        };
        let root = finite_root(i, root)?;
        update_caches(i, root, state, sigma);
    }
    state.cycle += 1;
    Ok(())
}

/// Gap from the cached products; `None` when the risk measure is nonpositive.
fn cached_gap(state: &CcdState, b: &[f64], stddev: Option<(&[f64], f64)>) -> Option<f64> {
    match stddev {
        None => Some(gap(
            &contributions_from_product(&state.x, &state.sigma_x),
            b,
        )),
        Some((mu, c)) => stddev_contributions(&state.x, &state.sigma_x, mu, c)
            .ok()
            .map(|rc| gap(&rc, b)),
    }
}

/// Which matrix the coordinate updates run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveSpace {
    /// Solve on the correlation matrix with unit volatilities, then divide the
    /// weights by the volatilities and renormalize.
    #[default]
    Correlation,
    /// Solve directly on the covariance matrix.
    Covariance,
}

/// Solves the risk budgeting problem by cyclical coordinate descent, starting
/// from equal weights and working in correlation space.
pub fn solve_ccd(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
    measure: &RiskMeasure,
) -> Result<SolveOutcome> {
    solve_ccd_in(cov, b, settings, measure, SolveSpace::Correlation)
}

pub fn solve_ccd_in(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
    measure: &RiskMeasure,
    space: SolveSpace,
) -> Result<SolveOutcome> {
    settings.validate()?;
    let n = cov.dim();
    check_len("risk budgets", n, b.dim())?;
    measure.check_dim(n)?;
    let start = Instant::now();

    let (sigma, scaled_mu) = match space {
        SolveSpace::Correlation => {
            let mu = match measure {
                RiskMeasure::StdDevBased { mu, .. } => Some(
                    mu.iter()
                        .zip(cov.vols())
                        .map(|(m, s)| m / s)
                        .collect::<Vec<_>>(),
                ),
                RiskMeasure::Volatility => None,
            };
            (cov.corr().as_matrix(), mu)
        }
        SolveSpace::Covariance => (
            cov.covariance(),
            match measure {
                RiskMeasure::StdDevBased { mu, .. } => Some(mu.clone()),
                RiskMeasure::Volatility => None,
            },
        ),
    };
    let stddev = match measure {
        RiskMeasure::StdDevBased { c, .. } => scaled_mu.as_deref().map(|mu| (mu, *c)),
        RiskMeasure::Volatility => None,
    };
    let budgets = b.as_slice();
    let to_weights = |x: &[f64]| -> Result<Weights> {
        match space {
            SolveSpace::Correlation => crate::model::rescale_by_vol(x, cov.vols()),
            SolveSpace::Covariance => normalize(x),
        }
    };

    let mut state = CcdState::with_matrix(vec![1.0 / n as f64; n], sigma)?;
    let mut termination = Termination::BudgetExhausted;
    let mut last_gap = f64::INFINITY;

    while state.cycle < settings.max_cycles {
        if let Err(e) = run_cycle(&mut state, sigma, budgets, stddev) {
            termination = Termination::Numeric(e.to_string());
            break;
        }
        if state.cycle % REFRESH_EVERY == 0 {
            state.refresh_with(sigma);
        }
        let Some(quick) = cached_gap(&state, budgets, stddev) else {
            termination = Termination::NonPositiveRisk;
            break;
        };
        last_gap = quick;
        if quick <= settings.tolerance {
            // Confirm against the original model before declaring convergence.
            state.refresh_with(sigma);
            let weights = to_weights(&state.x)?;
            let confirmed = finish(&weights, cov, b, measure);
            match confirmed {
                Some(g) if g <= settings.tolerance => {
                    return Ok(SolveOutcome {
                        algorithm: Algorithm::Ccd,
                        weights,
                        converged: true,
                        cycles: state.cycle,
                        elapsed_seconds: start.elapsed().as_secs_f64(),
                        final_gap: g,
                        termination: Termination::Converged,
                    });
                }
                Some(g) => last_gap = g,
                None => {
                    termination = Termination::NonPositiveRisk;
                    break;
                }
            }
        }
    }

    let weights = match to_weights(&state.x) {
        Ok(w) => w,
        Err(_) => Weights::from_vec_unchecked(state.x.clone()),
    };
    let final_gap = finish(&weights, cov, b, measure).unwrap_or(last_gap);
    Ok(SolveOutcome {
        algorithm: Algorithm::Ccd,
        weights,
        converged: false,
        cycles: state.cycle,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_gap,
        termination,
    })
}
