//! Dense Cholesky factorization and the small vector kernels shared by the solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`, stored row-major so
/// that the inner products of the Crout recurrence run over contiguous rows.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric matrix. Only the lower triangle is read.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] naming the first pivot that
    /// is not strictly positive.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        Self::factor_shifted(a, None)
    }

    /// Factorizes `A + diag(shift)` without materializing the sum.
    pub fn factor_shifted(a: &DMatrix<f64>, shift: Option<&[f64]>) -> Result<Self> {
        let n = a.nrows();
        if let Some(s) = shift {
            assert_eq!(s.len(), n, "diagonal shift length");
        }
        if a.ncols() != n {
            return Err(Error::Dimension {
                what: "Cholesky input columns",
                expected: n,
                got: a.ncols(),
            });
        }
        let mut lower = vec![0.0; n * n];
        // Rows are produced in blocks of four so that each finished row is
        // streamed once per block rather than once per row.
        for i0 in (0..n).step_by(4) {
            let i1 = (i0 + 4).min(n);
            let (done, block) = lower.split_at_mut(i0 * n);
            let block = &mut block[..(i1 - i0) * n];
            if i1 - i0 == 4 {
                for j in 0..i0 {
                    let row_j = &done[j * n..j * n + j];
                    let s = dot4(
                        row_j,
                        [
                            &block[..j],
                            &block[n..n + j],
                            &block[2 * n..2 * n + j],
                            &block[3 * n..3 * n + j],
                        ],
                    );
                    let pivot = done[j * n + j];
                    for (r, sr) in s.iter().enumerate() {
                        block[r * n + j] = (a[(i0 + r, j)] - sr) / pivot;
                    }
                }
            } else {
                for j in 0..i0 {
                    let row_j = &done[j * n..j * n + j];
                    let pivot = done[j * n + j];
                    for r in 0..i1 - i0 {
                        let s = dot(&block[r * n..r * n + j], row_j);
                        block[r * n + j] = (a[(i0 + r, j)] - s) / pivot;
                    }
                }
            }
            for r in 0..i1 - i0 {
                let i = i0 + r;
                for j in i0..i {
                    let (above, row_i) = block.split_at_mut(r * n);
                    let row_j = &above[(j - i0) * n..(j - i0) * n + j];
                    let s = a[(i, j)] - dot(&row_i[..j], row_j);
                    row_i[j] = s / above[(j - i0) * n + j];
                }
                let row_i = &mut block[r * n..r * n + n];
                let diag = a[(i, i)] + shift.map_or(0.0, |s| s[i]);
                let d = diag - dot(&row_i[..i], &row_i[..i]);
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: d });
                }
                row_i[i] = d.sqrt();
            }
        }
        Ok(Self { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `L[i][j]`.
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// Solves `A x = rhs` by forward then backward substitution.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n, "right-hand side length");
        let mut z = rhs.to_vec();
        // L z = rhs
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            z[i] = (z[i] - dot(row, &z[..i])) / self.lower[i * n + i];
        }
        // Lᵀ x = z, walking columns of Lᵀ (rows of L) as axpy updates.
        for i in (0..n).rev() {
            z[i] /= self.lower[i * n + i];
            let zi = z[i];
            let row = &self.lower[i * n..i * n + i];
            for (zk, lik) in z[..i].iter_mut().zip(row) {
                *zk -= lik * zi;
            }
        }
        z
    }
}

/// Inner product with four independent accumulators so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let p = 4 * k;
        acc[0] += a[p] * b[p];
        acc[1] += a[p + 1] * b[p + 1];
        acc[2] += a[p + 2] * b[p + 2];
        acc[3] += a[p + 3] * b[p + 3];
    }
    let mut tail = 0.0;
    for p in 4 * chunks..a.len() {
        tail += a[p] * b[p];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Four inner products against one shared vector, two lanes each.
fn dot4(x: &[f64], rows: [&[f64]; 4]) -> [f64; 4] {
    let len = x.len();
    let [r0, r1, r2, r3] = rows;
    let (r0, r1, r2, r3) = (&r0[..len], &r1[..len], &r2[..len], &r3[..len]);
    let mut lo = [0.0; 4];
    let mut hi = [0.0; 4];
    let pairs = len / 2;
    for k in 0..pairs {
        let p = 2 * k;
        let (x0, x1) = (x[p], x[p + 1]);
        lo[0] += r0[p] * x0;
        hi[0] += r0[p + 1] * x1;
        lo[1] += r1[p] * x0;
        hi[1] += r1[p + 1] * x1;
        lo[2] += r2[p] * x0;
        hi[2] += r2[p + 1] * x1;
        lo[3] += r3[p] * x0;
        hi[3] += r3[p + 1] * x1;
    }
    if len % 2 == 1 {
        let p = len - 1;
        lo[0] += r0[p] * x[p];
        lo[1] += r1[p] * x[p];
        lo[2] += r2[p] * x[p];
        lo[3] += r3[p] * x[p];
    }
    [lo[0] + hi[0], lo[1] + hi[1], lo[2] + hi[2], lo[3] + hi[3]]
}

/// `A x` for a symmetric matrix, computed column by column (each column of a
/// column-major `DMatrix` is contiguous; symmetry makes it row `i` as well).
pub fn sym_matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|i| dot(a.column(i).as_slice(), x))
        .collect()
}

pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_and_solves_small_spd() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let chol = Cholesky::factor(&a).unwrap();
        assert!((chol.l(0, 0) - 2.0).abs() < 1e-15);
        assert!((chol.l(1, 0) - 1.0).abs() < 1e-15);
        let x = chol.solve(&[1.0, 2.0, 3.0]);
        let ax = sym_matvec(&a, &x);
        assert!(sup_norm_diff(&ax, &[1.0, 2.0, 3.0]) < 1e-13);
    }

    #[test]
    fn reports_failing_pivot() {
        // Correlation 1 between assets 0 and 1 makes pivot 1 vanish.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (1..=7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 140.0);
        assert_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn solve_matches_nalgebra_lu() {
        let n = 12;
        let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let a = &m * m.transpose() + DMatrix::identity(n, n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let ours = Cholesky::factor(&a).unwrap().solve(&rhs);
        let theirs = a
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&rhs))
            .unwrap();
        assert!(sup_norm_diff(&ours, theirs.as_slice()) < 1e-12);
    }

    #[test]
    fn factor_reproduces_matrix_for_ragged_blocks() {
        for n in [1, 2, 3, 4, 5, 9, 13, 30] {
            let m = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j * 9 + 1) % 13) as f64 / 13.0 - 0.4);
            let a = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
            let shift: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
            let chol = Cholesky::factor_shifted(&a, Some(&shift)).unwrap();
            let l = DMatrix::from_fn(n, n, |i, j| if j <= i { chol.l(i, j) } else { 0.0 });
            let rebuilt = &l * l.transpose();
            for i in 0..n {
                for j in 0..n {
                    let want = a[(i, j)] + if i == j { shift[i] } else { 0.0 };
                    assert!((rebuilt[(i, j)] - want).abs() < 1e-12, "n {n} ({i},{j})");
                }
            }
        }
    }
}
