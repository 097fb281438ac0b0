//! `riskbudget solve | gen | bench`
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 the solver did not converge.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use riskbudget::bench::{scaling_study, StudyConfig};
use riskbudget::io::{
    format_matrix_csv, read_matrix_csv, read_vector_csv, write_text, SolveReport,
};
use riskbudget::matrix_lab::{
    arithmetic_spectrum, arithmetic_spectrum_with_min, correlation_from_spectrum,
    sorted_eigenvalues, SeededRng,
};
use riskbudget::{
    solve, Algorithm, CorrelationMatrix, CovarianceModel, Error, RiskBudgets, RiskMeasure,
    SolverSettings,
};

#[derive(Parser)]
#[command(
    name = "riskbudget",
    version,
    about = "Risk budgeting portfolio solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Corr,
    Cov,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for risk-budgeting weights and write a JSON report.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum)]
        matrix_kind: MatrixKind,
        /// Volatilities, one per line (required with --matrix-kind corr).
        #[arg(long)]
        vols: Option<PathBuf>,
        /// Risk budgets, one per line; rescaled to sum to one. Default: uniform.
        #[arg(long)]
        budgets: Option<PathBuf>,
        #[arg(long, default_value = "ccd")]
        algo: String,
        /// Expected returns for the measure -xᵀμ + c·σ(x) (ccd only).
        #[arg(long)]
        mu: Option<PathBuf>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long, default_value_t = 10_000)]
        max_cycles: usize,
        /// Report path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a random correlation matrix with eigenvalues 2i/(n+1).
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Use an arithmetic spectrum starting at this value instead.
        #[arg(long)]
        min_eigenvalue: Option<f64>,
    },
    /// Time the solvers on generated matrices.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
        sizes: Vec<usize>,
        /// Trials per size. Default: 50, or 10 from n = 500.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "ccd,newton,jacobi")]
        algos: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stats CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Plot-series CSV path. Default: `<out>` with a `.series.csv` suffix.
        #[arg(long)]
        series_out: Option<PathBuf>,
        #[arg(long)]
        no_parallel: bool,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long, default_value_t = 10_000)]
        max_cycles: usize,
        /// Time each trial this many times and keep the fastest run.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve {
            matrix,
            matrix_kind,
            vols,
            budgets,
            algo,
            mu,
            c,
            tolerance,
            max_cycles,
            output,
        } => cmd_solve(SolveArgs {
            matrix,
            matrix_kind,
            vols,
            budgets,
            algo,
            mu,
            c,
            tolerance,
            max_cycles,
            output,
        }),
        Command::Gen {
            n,
            seed,
            out,
            min_eigenvalue,
        } => cmd_gen(n, seed, &out, min_eigenvalue),
        Command::Bench {
            sizes,
            trials,
            algos,
            seed,
            out,
            series_out,
            no_parallel,
            tolerance,
            max_cycles,
            repeats,
        } => {
            let series_out = series_out.unwrap_or_else(|| {
                let mut s = out.clone().into_os_string();
                s.push(".series.csv");
                s.into()
            });
            let settings = SolverSettings {
                tolerance,
                max_cycles,
                ..SolverSettings::default()
            };
            let config = StudyConfig {
                sizes,
                trials_per_size: trials,
                algorithms: Vec::new(),
                seed_base: seed,
                settings,
                parallel: !no_parallel,
                warm_up: true,
                repeats,
            };
            cmd_bench(config, &algos, &out, &series_out)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

struct SolveArgs {
    matrix: PathBuf,
    matrix_kind: MatrixKind,
    vols: Option<PathBuf>,
    budgets: Option<PathBuf>,
    algo: String,
    mu: Option<PathBuf>,
    c: Option<f64>,
    tolerance: f64,
    max_cycles: usize,
    output: Option<PathBuf>,
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let algorithm: Algorithm = args.algo.parse()?;
    let raw = read_matrix_csv(&args.matrix)?;
    let cov = match args.matrix_kind {
        MatrixKind::Cov => CovarianceModel::from_covariance(raw)?,
        MatrixKind::Corr => {
            let path = args
                .vols
                .ok_or_else(|| Error::Input("--vols is required with --matrix-kind corr".into()))?;
            CovarianceModel::new(read_vector_csv(&path)?, CorrelationMatrix::new(raw)?)?
        }
    };
    let n = cov.dim();
    let budgets = match &args.budgets {
        Some(path) => RiskBudgets::normalized(read_vector_csv(path)?)?,
        None => RiskBudgets::uniform(n),
    };
    let measure = match (&args.mu, args.c) {
        (None, None) => RiskMeasure::Volatility,
        (mu, c) => {
            let mu = match mu {
                Some(path) => read_vector_csv(path)?,
                None => vec![0.0; n],
            };
            RiskMeasure::std_dev_based(mu, c.unwrap_or(1.0))?
        }
    };
    let settings = SolverSettings {
        tolerance: args.tolerance,
        max_cycles: args.max_cycles,
        algorithm,
    };
    let outcome = solve(&cov, &budgets, &settings, &measure)?;
    let report = SolveReport::new(&outcome, &cov, &measure).to_json();
    match &args.output {
        Some(path) => write_text(path, &report)?,
        None => print!("{report}"),
    }
    if outcome.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} did not converge: {:?} after {} cycles, gap {:e}",
            outcome.algorithm, outcome.termination, outcome.cycles, outcome.final_gap
        );
        Ok(ExitCode::from(2))
    }
}

fn cmd_gen(
    n: usize,
    seed: u64,
    out: &std::path::Path,
    min_eigenvalue: Option<f64>,
) -> Result<ExitCode, Error> {
    let spec = match min_eigenvalue {
        Some(min) => arithmetic_spectrum_with_min(n, min)?,
        None => arithmetic_spectrum(n)?,
    };
    let corr = correlation_from_spectrum(&spec, &mut SeededRng::new(seed))?;
    write_text(out, &format_matrix_csv(corr.as_matrix()))?;
    let eig = sorted_eigenvalues(corr.as_matrix());
    let (min, max) = (eig[0], eig[eig.len() - 1]);
    println!("min eigenvalue:   {min:.10}");
    println!("max eigenvalue:   {max:.10}");
    println!("condition number: {:.6}", max / min);
    Ok(ExitCode::SUCCESS)
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, Error> {
    let algorithms = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Algorithm>, Error>>()?;
    if algorithms.is_empty() {
        return Err(Error::Input(
            "no algorithms given (valid: ccd, newton, jacobi)".into(),
        ));
    }
    Ok(algorithms)
}

fn cmd_bench(
    mut config: StudyConfig,
    algos: &str,
    out: &std::path::Path,
    series_out: &std::path::Path,
) -> Result<ExitCode, Error> {
    config.algorithms = parse_algorithms(algos)?;
    let report = scaling_study(&config)?;
    write_text(out, &report.stats_csv())?;
    write_text(series_out, &report.series_csv())?;
    print!("{}", report.table());
    Ok(ExitCode::SUCCESS)
}
