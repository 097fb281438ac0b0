//! Benchmark harness: convergence frequency and solve-time statistics per
//! algorithm on seeded simulated correlation matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix_lab::generate_correlation;
use crate::model::{
    Algorithm, CorrelationMatrix, CovarianceModel, RiskBudgets, RiskMeasure, SolveOutcome,
    SolverSettings,
};

pub const STATS_CSV_HEADER: &str =
    "algorithm,n,trials,p_s,t_mean_s,t_mean_cs,t_max_s,t_mean_converged_s";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub seed: u64,
    pub converged: bool,
    pub elapsed_seconds: f64,
    pub cycles_or_iterations: usize,
    pub final_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub algorithm: Algorithm,
    pub n: usize,
    pub trials: usize,
    /// Percentage of converged trials.
    pub p_s: f64,
    /// Mean solve time over all trials, seconds.
    pub t_mean: f64,
    pub t_max: f64,
    /// Mean over converged trials only.
    pub t_mean_converged: Option<f64>,
    pub mean_cycles: f64,
    /// Mean of `elapsed / cycles` over trials with at least one cycle.
    pub t_mean_per_cycle: Option<f64>,
}

/// Default trials per size: fewer for large matrices.
pub fn default_trials(n: usize) -> usize {
    if n >= 500 {
        10
    } else {
        50
    }
}

/// Dispatches to the solver named in `settings`.
pub fn run_solver(
    cov: &CovarianceModel,
    b: &RiskBudgets,
    settings: &SolverSettings,
) -> Result<SolveOutcome> {
    crate::solve(cov, b, settings, &RiskMeasure::Volatility)
}

/// Times one ERC solve with unit volatilities on a given matrix.
pub fn run_trial_on(
    algorithm: Algorithm,
    seed: u64,
    corr: &CorrelationMatrix,
    settings: &SolverSettings,
) -> Result<TrialRecord> {
    let n = corr.dim();
    let cov = CovarianceModel::from_correlation(corr.clone());
    let b = RiskBudgets::uniform(n);
    let settings = SolverSettings {
        algorithm,
        ..*settings
    };
    let outcome = run_solver(&cov, &b, &settings)?;
    Ok(TrialRecord {
        algorithm,
        n,
        seed,
        converged: outcome.converged,
        elapsed_seconds: outcome.elapsed_seconds,
        cycles_or_iterations: outcome.cycles,
        final_gap: outcome.final_gap,
    })
}

/// Generates the seeded matrix, then times only the solve.
pub fn run_trial(
    algorithm: Algorithm,
    n: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<TrialRecord> {
    let corr = generate_correlation(n, seed)?;
    run_trial_on(algorithm, seed, &corr, settings)
}

/// Collapses records sharing one `(algorithm, n)` into statistics.
pub fn aggregate(records: &[TrialRecord]) -> Result<BenchStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("cannot aggregate an empty record list".into()))?;
    if let Some(r) = records
        .iter()
        .find(|r| r.algorithm != first.algorithm || r.n != first.n)
    {
        return Err(Error::Input(format!(
            "records mix ({}, {}) with ({}, {})",
            first.algorithm, first.n, r.algorithm, r.n
        )));
    }
    let trials = records.len();
    let converged: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
    let t_mean = records.iter().map(|r| r.elapsed_seconds).sum::<f64>() / trials as f64;
    let t_max = records
        .iter()
        .map(|r| r.elapsed_seconds)
        .fold(0.0, f64::max);
    let t_mean_converged = (!converged.is_empty())
        .then(|| converged.iter().map(|r| r.elapsed_seconds).sum::<f64>() / converged.len() as f64);
    let per_cycle: Vec<f64> = records
        .iter()
        .filter(|r| r.cycles_or_iterations > 0)
        .map(|r| r.elapsed_seconds / r.cycles_or_iterations as f64)
        .collect();
    Ok(BenchStats {
        algorithm: first.algorithm,
        n: first.n,
        trials,
        p_s: 100.0 * converged.len() as f64 / trials as f64,
        t_mean,
        t_max,
        t_mean_converged,
        mean_cycles: records
            .iter()
            .map(|r| r.cycles_or_iterations as f64)
            .sum::<f64>()
            / trials as f64,
        t_mean_per_cycle: (!per_cycle.is_empty())
            .then(|| per_cycle.iter().sum::<f64>() / per_cycle.len() as f64),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Input("a slope needs at least two points".into()));
    }
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Input(
            "log-log fit needs positive coordinates".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("log-log fit needs two distinct sizes".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    /// `None` uses [`default_trials`] per size.
    pub trials_per_size: Option<usize>,
    pub algorithms: Vec<Algorithm>,
    pub seed_base: u64,
    pub settings: SolverSettings,
    pub parallel: bool,
    /// One untimed solve per (algorithm, size) before measuring.
    pub warm_up: bool,
    /// Times each trial this many times and keeps the fastest run.
    pub repeats: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50],
            trials_per_size: None,
            algorithms: Algorithm::ALL.to_vec(),
            seed_base: 0,
            settings: SolverSettings::default(),
            parallel: true,
            warm_up: true,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub algorithms: Vec<Algorithm>,
    pub stats: Vec<BenchStats>,
    pub records: Vec<TrialRecord>,
}

/// Runs every algorithm on the same seeded matrices for each size.
pub fn scaling_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.algorithms.is_empty() {
        return Err(Error::Input("no algorithms selected".into()));
    }
    if let Some(&n) = config.sizes.iter().find(|&&n| n < 2) {
        return Err(Error::Input(format!(
            "matrix size must be at least 2, got {n}"
        )));
    }
    if config.trials_per_size == Some(0) {
        return Err(Error::Input("trials per size must be at least 1".into()));
    }
    if config.repeats == 0 {
        return Err(Error::Input("repeats must be at least 1".into()));
    }
    config.settings.validate()?;

    let mut records = Vec::new();
    for &n in &config.sizes {
        let trials = config.trials_per_size.unwrap_or_else(|| default_trials(n));
        let seeds: Vec<u64> = (0..trials as u64)
            .map(|k| config.seed_base.wrapping_add(k))
            .collect();
        let matrices: Vec<CorrelationMatrix> = if config.parallel {
            seeds
                .par_iter()
                .map(|&s| generate_correlation(n, s))
                .collect::<Result<_>>()?
        } else {
            seeds
                .iter()
                .map(|&s| generate_correlation(n, s))
                .collect::<Result<_>>()?
        };
        if config.warm_up {
            for &algorithm in &config.algorithms {
                run_trial_on(algorithm, seeds[0], &matrices[0], &config.settings)?;
            }
        }
        let jobs: Vec<(Algorithm, usize)> = config
            .algorithms
            .iter()
            .flat_map(|&a| (0..trials).map(move |k| (a, k)))
            .collect();
        let run = |&(algorithm, k): &(Algorithm, usize)| {
            run_trial_on(algorithm, seeds[k], &matrices[k], &config.settings)
        };
        // Repeats go round all jobs in turn, so a transient slowdown of the
        // machine touches only some of each job's runs.
        let mut batch: Vec<TrialRecord> = Vec::new();
        for round in 0..config.repeats {
            let timed: Vec<TrialRecord> = if config.parallel {
                jobs.par_iter().map(run).collect::<Result<_>>()?
            } else {
                jobs.iter().map(run).collect::<Result<_>>()?
            };
            if round == 0 {
                batch = timed;
            } else {
                for (best, again) in batch.iter_mut().zip(timed) {
                    if again.elapsed_seconds < best.elapsed_seconds {
                        *best = again;
                    }
                }
            }
        }
        records.append(&mut batch);
    }
    records.sort_by_key(|r| (r.algorithm, r.n, r.seed));

    let mut groups: BTreeMap<(usize, usize), Vec<TrialRecord>> = BTreeMap::new();
    for r in &records {
        let order = config
            .algorithms
            .iter()
            .position(|a| *a == r.algorithm)
            .unwrap_or(usize::MAX);
        groups.entry((order, r.n)).or_default().push(r.clone());
    }
    let stats = groups
        .values()
        .map(|g| aggregate(g))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport {
        algorithms: config.algorithms.clone(),
        stats,
        records,
    })
}

impl StudyReport {
    pub fn stats_csv(&self) -> String {
        let mut out = String::from(STATS_CSV_HEADER);
        out.push('\n');
        for s in &self.stats {
            let _ = writeln!(
                out,
                "{},{},{},{:.2},{:.6e},{:.4},{:.6e},{}",
                s.algorithm,
                s.n,
                s.trials,
                s.p_s,
                s.t_mean,
                s.t_mean * 100.0,
                s.t_max,
                s.t_mean_converged
                    .map_or_else(String::new, |t| format!("{t:.6e}")),
            );
        }
        out
    }

    /// `n,<algorithm>...` with the mean solve time in seconds.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("n");
        for a in &self.algorithms {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
        for n in self.sizes() {
            let _ = write!(out, "{n}");
            for a in &self.algorithms {
                match self.stat(*a, n) {
                    Some(s) => {
                        let _ = write!(out, ",{:.6e}", s.t_mean);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned table of mean solve times in hundredths of a second, one row
    /// per size. `NC` marks algorithms that never converged.
    pub fn table(&self) -> String {
        let width = 16;
        let mut out = format!("{:>6}", "n");
        for a in &self.algorithms {
            let _ = write!(out, " {:>width$}", a.name());
        }
        out.push('\n');
        for n in self.sizes() {
            let _ = write!(out, "{n:>6}");
            for a in &self.algorithms {
                let cell = match self.stat(*a, n) {
                    None => "-".to_string(),
                    Some(s) if s.p_s == 0.0 => "NC".to_string(),
                    Some(s) if s.p_s < 100.0 => {
                        format!("{:.2} ({:.0}%)", s.t_mean * 100.0, s.p_s)
                    }
                    Some(s) => format!("{:.2}", s.t_mean * 100.0),
                };
                let _ = write!(out, " {cell:>width$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn stat(&self, algorithm: Algorithm, n: usize) -> Option<&BenchStats> {
        self.stats
            .iter()
            .find(|s| s.algorithm == algorithm && s.n == n)
    }

    fn sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.stats.iter().map(|s| s.n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }
}
