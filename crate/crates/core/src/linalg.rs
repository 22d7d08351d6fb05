//! Dense square systems and their LU factorization.
//!
//! The interpolation matrix is a symmetric saddle-point matrix and is
//! indefinite, so Cholesky is not applicable. Partial pivoting handles the
//! zero lower-right block.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pivots smaller than this multiple of the largest matrix entry are
/// treated as zero.
pub const PIVOT_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Below this size the elimination runs on a single thread.
const PARALLEL_MIN_ROWS: usize = 128;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        self.data.chunks_exact_mut(self.n.max(1))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// `P A = L U` with unit lower-triangular `L`, stored in place.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    min_pivot: T,
}

impl<T: Real> LuFactors<T> {
    /// Factorizes `a`, failing on the first pivot below
    /// `PIVOT_RELATIVE_THRESHOLD * max|a_ij|`.
    pub fn factor(mut a: DenseMatrix<T>) -> Result<Self> {
        let n = a.n;
        let scale = a.max_abs();
        let threshold = scale * T::lit(PIVOT_RELATIVE_THRESHOLD);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = T::infinity();

        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a.get(i, k).abs()))
                .fold((k, -T::one()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if !(best > threshold) || scale == T::zero() {
                return Err(Error::SingularSystem {
                    pivot: k,
                    magnitude: best.as_f64(),
                    threshold: threshold.as_f64(),
                });
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                perm.swap(p, k);
                let (head, tail) = a.data.split_at_mut(p * n);
                head[k * n..(k + 1) * n].swap_with_slice(&mut tail[..n]);
            }

            let (upper, lower) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..];
            let pivot = pivot_row[k];
            let eliminate = |row: &mut [T]| {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor != T::zero() {
                    for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *x = *x - factor * u;
                    }
                }
            };
            if n - k > PARALLEL_MIN_ROWS {
                lower.par_chunks_exact_mut(n).for_each(eliminate);
            } else {
                lower.chunks_exact_mut(n).for_each(eliminate);
            }
        }

        Ok(LuFactors {
            lu: a,
            perm,
            min_pivot: if n == 0 { T::zero() } else { min_pivot },
        })
    }

    /// Smallest pivot magnitude encountered, a cheap conditioning diagnostic.
    pub fn min_pivot(&self) -> T {
        self.min_pivot
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = row[..i]
                .iter()
                .zip(&x[..i])
                .fold(T::zero(), |acc, (&l, &y)| acc + l * y);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .fold(T::zero(), |acc, (&u, &y)| acc + u * y);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[f64]]) -> DenseMatrix<f64> {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[test]
    fn solves_with_zero_leading_pivot() {
        let a = from_rows(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 3.0], &[2.0, 3.0, 0.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = LuFactors::factor(a).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_names_pivot() {
        let a = from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[1.0, 0.0, 1.0]]);
        match LuFactors::factor(a) {
            Err(Error::SingularSystem { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn large_system_uses_parallel_path() {
        let n = 300;
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                a.set(i, j, if i == j { v + n as f64 } else { v });
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = LuFactors::factor(a).unwrap().solve(&b).unwrap();
        let err = x.iter().zip(&x_true).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the matching unit eigenvectors.
pub fn symmetric_eigen<T: Real>(mut a: Vec<Vec<T>>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off <= T::min_positive_value() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
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
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

#[cfg(test)]
mod eigen_tests {
    use super::*;

    #[test]
    fn recovers_known_spectrum() {
        let a = vec![
            vec![2.0_f64, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ];
        let (vals, vecs) = symmetric_eigen(a.clone());
        let mut sorted = vals.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in sorted.iter().zip([1.0, 3.0, 5.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (lambda, v) in vals.iter().zip(&vecs) {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i][j] * v[j]).sum();
                assert!((av - lambda * v[i]).abs() < 1e-12);
            }
        }
    }
}
