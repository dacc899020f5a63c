//! Dense real-matrix kernel for route models.
//!
//! A thin checked layer over `nalgebra`: dimension errors are reported
//! instead of panicking, and factorizations reject pivots below
//! [`PIVOT_TOL`] as singular.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Smallest pivot magnitude accepted by [`DenseMatrix::invert`] and
/// [`DenseMatrix::solve`].
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is singular (pivot {0:e})")]
    Singular(f64),
    #[error("non-finite entry")]
    NonFinite,
}

/// Row-major view over a dense `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

/// LU factorization with partial pivoting, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Build from row-major data.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension {
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, data)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::Dimension {
                    left: (rows.len(), cols),
                    right: (1, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(rows.len(), cols, &data)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols() != other.rows() {
            return Err(LinalgError::Dimension {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self(&self.0 * &other.0))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols() != v.len() {
            return Err(LinalgError::Dimension {
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((&self.0 * DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, f: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.rows() != f.len() {
            return Err(LinalgError::Dimension {
                left: (1, f.len()),
                right: self.shape(),
            });
        }
        Ok((self.0.transpose() * DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::Dimension {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self(&self.0 - &other.0))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Result<Lu, LinalgError> {
        let (r, c) = self.shape();
        if r != c {
            return Err(LinalgError::NotSquare(r, c));
        }
        let lu = self.0.clone().lu();
        let u = lu.u();
        let pivot = u.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        if r > 0 && !(pivot >= PIVOT_TOL) {
            return Err(LinalgError::Singular(pivot));
        }
        Ok(Lu(lu))
    }

    pub fn invert(&self) -> Result<DenseMatrix, LinalgError> {
        let lu = self.lu()?;
        lu.0
            .try_inverse()
            .map(Self)
            .ok_or(LinalgError::Singular(0.0))
    }
}

impl Lu {
    pub fn dim(&self) -> usize {
        self.0.u().nrows()
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim() {
            return Err(LinalgError::Dimension {
                left: (self.dim(), self.dim()),
                right: (b.len(), 1),
            });
        }
        self.0
            .solve(&DVector::from_column_slice(b))
            .map(|x| x.iter().copied().collect())
            .ok_or(LinalgError::Singular(0.0))
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if b.rows() != self.dim() {
            return Err(LinalgError::Dimension {
                left: (self.dim(), self.dim()),
                right: b.shape(),
            });
        }
        self.0
            .solve(&b.0)
            .map(DenseMatrix)
            .ok_or(LinalgError::Singular(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_slice(n, n, &data).unwrap()
    }

    #[test]
    fn identity_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(5, &mut rng);
        assert_eq!(a.matmul(&DenseMatrix::identity(5)).unwrap(), a);
    }

    #[test]
    fn small_product_by_hand() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = DenseMatrix::from_rows(&[vec![19.0, 22.0], vec![43.0, 50.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), c);
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(10, &mut rng);
        let b = random(10, &mut rng);
        let c = a.matmul(&b).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..10 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(LinalgError::Dimension { .. })));
        assert_eq!(a.invert(), Err(LinalgError::NotSquare(2, 3)));
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(
            DenseMatrix::from_row_slice(1, 1, &[f64::NAN]),
            Err(LinalgError::NonFinite)
        );
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        assert_eq!(
            DenseMatrix::identity(4).invert().unwrap(),
            DenseMatrix::identity(4)
        );
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let e = DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]).unwrap();
        assert_eq!(d.invert().unwrap(), e);
    }

    #[test]
    fn inverse_residual_on_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random(20, &mut rng);
        for i in 0..20 {
            a.set(i, i, a.get(i, i) + 20.0);
        }
        let inv = a.invert().unwrap();
        let r = a.matmul(&inv).unwrap().sub(&DenseMatrix::identity(20)).unwrap();
        assert!(r.norm_inf() < 1e-10);
    }

    #[test]
    fn singular_is_rejected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.invert(), Err(LinalgError::Singular(_))));
        let tiny = DenseMatrix::from_rows(&[vec![1e-15, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(tiny.lu(), Err(LinalgError::Singular(_))));
    }

    #[test]
    fn lu_solve_agrees_with_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = random(8, &mut rng);
        for i in 0..8 {
            a.set(i, i, a.get(i, i) + 8.0);
        }
        let b: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let x = a.lu().unwrap().solve(&b).unwrap();
        let y = a.invert().unwrap().mul_vec(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
        let f = vec![1.0; 8];
        let fa = a.vec_mul(&f).unwrap();
        for j in 0..8 {
            let col: f64 = (0..8).map(|i| a.get(i, j)).sum();
            assert!((fa[j] - col).abs() < 1e-12);
        }
    }
}
