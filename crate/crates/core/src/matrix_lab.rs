//! Random correlation matrices with a prescribed spectrum.
//!
//! A random orthogonal `Q` gives `A = Q diag(λ) Qᵀ` with the requested
//! eigenvalues and trace `n`. Givens rotations in planes `(p, q)` where
//! `a_pp` and `a_qq` straddle 1 then set one diagonal entry at a time to
//! exactly 1 (Bendel–Mickey). Rotations are orthogonal similarities, so the
//! spectrum is kept.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_positive, Error, Result};
use crate::model::CorrelationMatrix;

/// Diagonal entries within this distance of 1 count as unit.
const UNIT_SLACK: f64 = 1e-14;

/// Final snap of the diagonal to exactly 1 is allowed within this distance.
const SNAP_LIMIT: f64 = 1e-10;

/// Positive eigenvalues summing to `n`, equally spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    eigenvalues: Vec<f64>,
}

impl SpectrumSpec {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if n < 2 {
            return Err(Error::Input(format!(
                "a spectrum needs at least 2 eigenvalues, got {n}"
            )));
        }
        check_positive("eigenvalue", &eigenvalues)?;
        let sum: f64 = eigenvalues.iter().sum();
        if (sum - n as f64).abs() > 1e-10 {
            return Err(Error::Input(format!(
                "eigenvalues sum to {sum}, a correlation matrix needs trace {n}"
            )));
        }
        let step = eigenvalues[1] - eigenvalues[0];
        for w in eigenvalues.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-12 {
                return Err(Error::Input(
                    "eigenvalues are not arithmetically spaced".into(),
                ));
            }
        }
        Ok(Self { eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// `λ_i = 2i/(n+1)`, `i = 1..n`: trace `n`, smallest eigenvalue `2/(n+1)`.
pub fn arithmetic_spectrum(n: usize) -> Result<SpectrumSpec> {
    if n < 2 {
        return Err(Error::Input(format!(
            "matrix size must be at least 2, got {n}"
        )));
    }
    let denom = (n + 1) as f64;
    SpectrumSpec::new((1..=n).map(|i| 2.0 * i as f64 / denom).collect())
}

/// Arithmetic spectrum with the given smallest eigenvalue in `(0, 1]`;
/// the largest is `2 − min`.
pub fn arithmetic_spectrum_with_min(n: usize, min_eigenvalue: f64) -> Result<SpectrumSpec> {
    if n < 2 {
        return Err(Error::Input(format!(
            "matrix size must be at least 2, got {n}"
        )));
    }
    if !(min_eigenvalue > 0.0 && min_eigenvalue <= 1.0) {
        return Err(Error::Input(format!(
            "smallest eigenvalue must lie in (0, 1], got {min_eigenvalue}"
        )));
    }
    let step = 2.0 * (1.0 - min_eigenvalue) / (n - 1) as f64;
    SpectrumSpec::new((0..n).map(|i| min_eigenvalue + step * i as f64).collect())
}

/// Seeded deviate stream. The same seed yields the same numbers on a given build.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::Input(format!(
            "matrix size must be at least 2, got {n}"
        )));
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.gaussian());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Rotates rows and columns `p` and `q` so that the new `a_pp` is exactly 1.
fn unit_rotation(a: &mut DMatrix<f64>, p: usize, q: usize) {
    let n = a.nrows();
    let (app, aqq, apq) = (a[(p, p)], a[(q, q)], a[(p, q)]);
    // c²app − 2cs apq + s²aqq = 1 with t = s/c:
    // t²(aqq − 1) − 2 apq t + (app − 1) = 0.
    let disc = apq * apq - (app - 1.0) * (aqq - 1.0);
    let root = apq + apq.signum() * disc.sqrt();
    let root = if root == 0.0 { disc.sqrt() } else { root };
    let t1 = root / (aqq - 1.0);
    let t2 = (app - 1.0) / root;
    let t = if t1.abs() < t2.abs() { t1 } else { t2 };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = c * t;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[(k, p)] = new_p;
        a[(p, k)] = new_p;
        a[(k, q)] = new_q;
        a[(q, k)] = new_q;
    }
    let new_qq = s * s * app + 2.0 * c * s * apq + c * c * aqq;
    let new_pq = c * s * (app - aqq) + (c * c - s * s) * apq;
    a[(p, p)] = 1.0;
    a[(q, q)] = new_qq;
    a[(p, q)] = new_pq;
    a[(q, p)] = new_pq;
}

/// Drives the diagonal of a symmetric positive-definite matrix with trace `n`
/// to unit values using at most `n − 1` Givens rotations.
pub fn unit_diagonal_by_rotations(a: &mut DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    let mut rotations = 0;
    loop {
        let below = (0..n).find(|&i| a[(i, i)] < 1.0 - UNIT_SLACK);
        let above = (0..n).find(|&i| a[(i, i)] > 1.0 + UNIT_SLACK);
        let (i, j) = match (below, above) {
            (Some(i), Some(j)) => (i, j),
            (None, None) => break,
            (Some(k), None) | (None, Some(k)) => {
                let dev = a[(k, k)] - 1.0;
                if dev.abs() <= SNAP_LIMIT {
                    break;
                }
                return Err(Error::Numeric(format!(
                    "no rotation partner for diagonal entry {k} (deviation {dev:e})"
                )));
            }
        };
        // Fix the entry closer to 1; the partner keeps its side of 1.
        let (p, q) = if (a[(i, i)] - 1.0).abs() <= (a[(j, j)] - 1.0).abs() {
            (i, j)
        } else {
            (j, i)
        };
        unit_rotation(a, p, q);
        rotations += 1;
        if rotations > n {
            return Err(Error::Numeric("diagonal rotation did not terminate".into()));
        }
    }
    for k in 0..n {
        let dev = a[(k, k)] - 1.0;
        if dev.abs() > SNAP_LIMIT {
            return Err(Error::Numeric(format!(
                "diagonal entry {k} left at deviation {dev:e}"
            )));
        }
        a[(k, k)] = 1.0;
    }
    Ok(rotations)
}

/// Random correlation matrix with the eigenvalues of `spec`.
pub fn correlation_from_spectrum(
    spec: &SpectrumSpec,
    rng: &mut SeededRng,
) -> Result<CorrelationMatrix> {
    let n = spec.dim();
    let q = random_orthogonal(n, rng)?;
    let mut half = q;
    for (j, lambda) in spec.eigenvalues().iter().enumerate() {
        half.column_mut(j).scale_mut(lambda.sqrt());
    }
    let mut a = &half * half.transpose();
    for i in 0..n {
        for j in 0..i {
            let mid = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = mid;
            a[(j, i)] = mid;
        }
    }
    unit_diagonal_by_rotations(&mut a)?;
    CorrelationMatrix::new(a)
}

/// Correlation matrix of size `n` with the default arithmetic spectrum.
pub fn generate_correlation(n: usize, seed: u64) -> Result<CorrelationMatrix> {
    let spec = arithmetic_spectrum(n)?;
    correlation_from_spectrum(&spec, &mut SeededRng::new(seed))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi eigenvalue sweep written independently of nalgebra.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)]).collect())
            .collect();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(
            arithmetic_spectrum(3).unwrap().eigenvalues(),
            &[0.5, 1.0, 1.5]
        );
        let two = arithmetic_spectrum(2).unwrap();
        assert!((two.eigenvalues()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((two.eigenvalues()[1] - 4.0 / 3.0).abs() < 1e-15);
        for n in [2, 7, 100, 1500] {
            let s = arithmetic_spectrum(n).unwrap();
            let sum: f64 = s.eigenvalues().iter().sum();
            assert!((sum - n as f64).abs() < 1e-10);
            assert!(s.eigenvalues()[0] > 0.0);
        }
        assert!(arithmetic_spectrum(1).is_err());
        let custom = arithmetic_spectrum_with_min(5, 0.2).unwrap();
        assert!((custom.eigenvalues()[4] - 1.8).abs() < 1e-15);
        assert!(SpectrumSpec::new(vec![0.5, 1.5, 1.0]).is_err());
        assert!(SpectrumSpec::new(vec![1.0, 1.5]).is_err());
    }

    #[test]
    fn orthogonal_examples() {
        for n in [2, 10, 100] {
            let q = random_orthogonal(n, &mut SeededRng::new(9)).unwrap();
            let err = (q.transpose() * &q - DMatrix::identity(n, n)).amax();
            assert!(err <= 1e-12, "n = {n}: {err}");
            if n <= 10 {
                assert!((q.determinant().abs() - 1.0).abs() < 1e-10);
            }
        }
        let a = random_orthogonal(6, &mut SeededRng::new(5)).unwrap();
        let b = random_orthogonal(6, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_spectrum_gives_identity() {
        let spec = SpectrumSpec::new(vec![1.0; 6]).unwrap();
        let c = correlation_from_spectrum(&spec, &mut SeededRng::new(1)).unwrap();
        assert!((c.as_matrix() - DMatrix::identity(6, 6)).amax() < 1e-14);
    }

    #[test]
    fn three_by_three_matches_independent_eigensolver() {
        let c = generate_correlation(3, 42).unwrap();
        let eig = jacobi_eigenvalues(c.as_matrix());
        for (e, want) in eig.iter().zip([0.5, 1.0, 1.5]) {
            assert!((e - want).abs() < 1e-8);
        }
        for i in 0..3 {
            assert_eq!(c.get(i, i), 1.0);
        }
    }

    #[test]
    fn fidelity_and_bounds() {
        for (n, seed) in [(10, 1), (40, 2)] {
            let c = generate_correlation(n, seed).unwrap();
            let spec = arithmetic_spectrum(n).unwrap();
            let eig = jacobi_eigenvalues(c.as_matrix());
            for (e, want) in eig.iter().zip(spec.eigenvalues()) {
                assert!((e - want).abs() < 1e-8);
            }
            let trace: f64 = (0..n).map(|i| c.get(i, i)).sum();
            assert!((trace - n as f64).abs() < 1e-10);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(c.get(i, j), c.get(j, i));
                    if i != j {
                        assert!(c.get(i, j).abs() < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_count_bounded() {
        let n = 25;
        let spec = arithmetic_spectrum(n).unwrap();
        let mut rng = SeededRng::new(3);
        let q = random_orthogonal(n, &mut rng).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spec.eigenvalues()));
        let mut a = &q * d * q.transpose();
        a = (&a + a.transpose()) * 0.5;
        let rotations = unit_diagonal_by_rotations(&mut a).unwrap();
        assert!(rotations < n);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            generate_correlation(12, 77).unwrap(),
            generate_correlation(12, 77).unwrap()
        );
        assert_ne!(
            generate_correlation(12, 77).unwrap(),
            generate_correlation(12, 78).unwrap()
        );
    }
}
