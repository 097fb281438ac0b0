use std::path::Path;
use std::process::{Command, Output};

use riskbudget::io::{parse_matrix_csv, SolveReport};
use riskbudget::matrix_lab::sorted_eigenvalues;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskbudget"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn report(path: &Path) -> SolveReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_two_assets_with_each_solver() {
    let dir = TempDir::new().unwrap();
    let corr = write(&dir, "corr.csv", "1,0.5\n0.5,1\n");
    let vols = write(&dir, "vols.csv", "0.1\n0.2\n");
    let mut weights = Vec::new();
    for algo in ["ccd", "newton"] {
        let out_path = dir.path().join(format!("{algo}.json"));
        let out = run(&[
            "solve",
            "--matrix",
            &corr,
            "--matrix-kind",
            "corr",
            "--vols",
            &vols,
            "--algo",
            algo,
            "--output",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let r = report(&out_path);
        assert!(r.converged);
        assert!(r.final_gap <= 1e-8);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((r.weights[0] - 2.0 / 3.0).abs() < 1e-6 && (r.weights[1] - 1.0 / 3.0).abs() < 1e-6);
        assert!(r
            .risk_contributions
            .iter()
            .all(|rc| (rc - 0.5).abs() < 1e-6));
        weights.push(r.weights);
    }
    assert!(weights[0]
        .iter()
        .zip(&weights[1])
        .all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn solve_identity_covariance_to_stdout() {
    let dir = TempDir::new().unwrap();
    let cov = write(&dir, "id.csv", "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n");
    let out = run(&["solve", "--matrix", &cov, "--matrix-kind", "cov"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: SolveReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        r.weights.iter().all(|w| (w - 0.25).abs() < 1e-8),
        "{:?}",
        r.weights
    );
}

#[test]
fn solve_with_budgets_and_stddev_measure() {
    let dir = TempDir::new().unwrap();
    let cov = write(&dir, "cov.csv", "0.04,0.006\n0.006,0.09\n");
    let budgets = write(&dir, "b.csv", "2\n1\n");
    let mu = write(&dir, "mu.csv", "0.05\n0.02\n");
    let out_path = dir.path().join("r.json");
    let out = run(&[
        "solve",
        "--matrix",
        &cov,
        "--matrix-kind",
        "cov",
        "--budgets",
        &budgets,
        "--mu",
        &mu,
        "--c",
        "2",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(&out_path);
    assert!(
        (r.risk_contributions[0] - 2.0 / 3.0).abs() < 1e-7,
        "{:?}",
        r.risk_contributions
    );

    // The measure is only available through ccd.
    let out = run(&[
        "solve",
        "--matrix",
        &cov,
        "--matrix-kind",
        "cov",
        "--mu",
        &mu,
        "--algo",
        "newton",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two() {
    let dir = TempDir::new().unwrap();
    let cov = write(&dir, "cov.csv", "0.01,0\n0,0.04\n");
    let out_path = dir.path().join("r.json");
    // Jacobi cycles between two points on uncorrelated assets.
    let out = run(&[
        "solve",
        "--matrix",
        &cov,
        "--matrix-kind",
        "cov",
        "--algo",
        "jacobi",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!report(&out_path).converged);

    let out = run(&[
        "solve",
        "--matrix",
        &cov,
        "--matrix-kind",
        "cov",
        "--max-cycles",
        "1",
        "--tolerance",
        "1e-15",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn input_errors_exit_one_with_location() {
    let dir = TempDir::new().unwrap();
    let vols = write(&dir, "vols.csv", "0.1\n0.2\n");

    let bad_cell = write(&dir, "bad.csv", "1,0.5\n0.5,oops\n");
    let out = run(&[
        "solve",
        "--matrix",
        &bad_cell,
        "--matrix-kind",
        "corr",
        "--vols",
        &vols,
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}");

    let ragged = write(&dir, "ragged.csv", "1,0.5\n0.5\n");
    let out = run(&[
        "solve",
        "--matrix",
        &ragged,
        "--matrix-kind",
        "corr",
        "--vols",
        &vols,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 2"));

    let not_pd = write(&dir, "npd.csv", "1,2\n2,1\n");
    let out = run(&[
        "solve",
        "--matrix",
        &not_pd,
        "--matrix-kind",
        "corr",
        "--vols",
        &vols,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pivot 1"), "{}", stderr(&out));

    let corr = write(&dir, "corr.csv", "1,0.5\n0.5,1\n");
    let out = run(&["solve", "--matrix", &corr, "--matrix-kind", "corr"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--vols"));

    let out = run(&["solve", "--matrix", &corr]);
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    let out = run(&[
        "solve",
        "--matrix",
        missing.to_str().unwrap(),
        "--matrix-kind",
        "cov",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let three = write(&dir, "three.csv", "0.1\n0.2\n0.3\n");
    let out = run(&[
        "solve",
        "--matrix",
        &corr,
        "--matrix-kind",
        "corr",
        "--vols",
        &three,
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_writes_reproducible_matrices() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "gen",
            "--n",
            "3",
            "--seed",
            "11",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("condition number"), "{text}");
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let m = parse_matrix_csv(&String::from_utf8(bytes).unwrap()).unwrap();
    for i in 0..3 {
        assert!((m[(i, i)] - 1.0).abs() < 1e-12);
    }
    let eig = sorted_eigenvalues(&m);
    for (got, want) in eig.iter().zip([0.5, 1.0, 1.5]) {
        assert!((got - want).abs() < 1e-8, "{eig:?}");
    }

    let out = run(&[
        "gen",
        "--n",
        "1",
        "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!stderr(&out).is_empty());

    let unwritable = dir.path().join("no/such/dir/m.csv");
    let out = run(&["gen", "--n", "3", "--out", unwritable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_stats_and_series() {
    let dir = TempDir::new().unwrap();
    let stats = dir.path().join("stats.csv");
    let series = dir.path().join("series.csv");
    let out = run(&[
        "bench",
        "--sizes",
        "20",
        "--trials",
        "5",
        "--algos",
        "ccd,newton,jacobi",
        "--out",
        stats.to_str().unwrap(),
        "--series-out",
        series.to_str().unwrap(),
        "--no-parallel",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("ccd") && table.contains("newton"), "{table}");

    let text = std::fs::read_to_string(&stats).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows[..2] {
        assert_eq!(&row[3], "100.00", "{row:?}");
    }
    let series = std::fs::read_to_string(&series).unwrap();
    assert!(series.starts_with("n,ccd,newton,jacobi\n20,"), "{series}");

    let out = run(&[
        "bench",
        "--sizes",
        "20",
        "--algos",
        "ccd,simplex",
        "--out",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(
        msg.contains("ccd") && msg.contains("newton") && msg.contains("jacobi"),
        "{msg}"
    );
}
