//! Dense real matrices and the spectral quantities the stability conditions
//! consume.
//!
//! `Matrix` is a thin newtype over `nalgebra::DMatrix<f64>` that guarantees
//! every entry is finite at construction. Products can still overflow; the
//! spectral routines re-check finiteness and report [`Error::NonFinite`].

use std::ops::{Mul, Sub};

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Matrices with spectral radius below `1 - TOL_SCHUR` are declared Schur stable.
pub const TOL_SCHUR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix shape must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, &flat)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self(DMatrix::from_fn(
            n,
            n,
            |r, c| if r == c { values[r] } else { 0.0 },
        ))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| (0..self.cols()).map(|c| self.0[(r, c)]).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn checked_mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: rhs.rows(),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: x.len(),
            });
        }
        Ok((0..self.rows())
            .map(|r| (0..self.cols()).map(|c| self.0[(r, c)] * x[c]).sum())
            .collect())
    }

    /// Largest absolute entry difference, for approximate comparisons.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            (self.rows(), self.cols()),
            (other.rows(), other.cols()),
            "shape mismatch"
        );
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn inner(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    /// Panics on incompatible shapes; use [`Matrix::checked_mul`] otherwise.
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.checked_mul(rhs).expect("incompatible matrix shapes")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows(), self.cols()),
            (rhs.rows(), rhs.cols()),
            "incompatible matrix shapes"
        );
        Matrix(&self.0 - &rhs.0)
    }
}

fn require_finite(m: &Matrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn require_square(m: &Matrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        })
    }
}

/// Largest singular value, computed as the square root of the largest
/// eigenvalue of `mᵀm` after scaling the entries to unit max magnitude.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    require_finite(m)?;
    let scale = m.inner().amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let unit = m.inner() / scale;
    let gram = unit.transpose() * &unit;
    let eig = gram.symmetric_eigenvalues();
    let top = eig.iter().copied().fold(0.0_f64, f64::max);
    Ok(top.max(0.0).sqrt() * scale)
}

/// Eigenvalues of a square matrix (real Schur form).
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    require_square(m)?;
    require_finite(m)?;
    Ok(m.inner().complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn is_schur(m: &Matrix) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0 - TOL_SCHUR)
}

/// `m` multiplied by itself `k` times by repeated multiplication.
pub fn matrix_power(m: &Matrix, k: u32) -> Result<Matrix> {
    require_square(m)?;
    let mut acc = Matrix::identity(m.rows());
    for _ in 0..k {
        acc = &acc * m;
    }
    Ok(acc)
}

/// `a·b − b·a`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    &(a * b) - &(b * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_family;
    use proptest::prelude::*;

    // Closed-form largest singular value of a 2x2 matrix.
    fn sigma_max_2x2(m: &Matrix) -> f64 {
        let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
        let fro2 = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        ((fro2 + (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
    }

    // Power iteration on mᵀm, independent of the eigensolver.
    fn sigma_max_power(m: &Matrix) -> f64 {
        let gram = &m.transpose() * m;
        let n = gram.rows();
        let mut v = vec![1.0; n];
        let mut est = 0.0;
        for _ in 0..10_000 {
            let w = gram.mul_vec(&v).unwrap();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|x| x / norm).collect();
            if (norm - est).abs() <= 1e-12 * norm {
                est = norm;
                break;
            }
            est = norm;
        }
        est.sqrt()
    }

    fn radius_2x2(m: &Matrix) -> f64 {
        let tr = m.get(0, 0) + m.get(1, 1);
        let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
        } else {
            det.sqrt()
        }
    }

    #[test]
    fn spectral_norm_trivial_cases() {
        assert!((spectral_norm(&Matrix::identity(2)).unwrap() - 1.0).abs() < 1e-14);
        assert!((spectral_norm(&Matrix::diag(&[2.0, 0.5])).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(spectral_norm(&Matrix::zeros(2, 3)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_extreme_magnitudes() {
        let tiny = spectral_norm(&Matrix::diag(&[3e-250, 1e-250])).unwrap();
        assert!((tiny / 3e-250 - 1.0).abs() < 1e-14);
        let huge = spectral_norm(&Matrix::diag(&[1e200, -4e200])).unwrap();
        assert!((huge / 4e200 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_of_stable_product() {
        let a = reference_family();
        let combo = &matrix_power(&a[0], 2).unwrap() * &matrix_power(&a[2], 2).unwrap();
        let norm = spectral_norm(&combo).unwrap();
        assert!((norm - 0.42).abs() <= 0.005, "{norm}");
        assert!((norm - sigma_max_2x2(&combo)).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rejects_non_finite() {
        let big = Matrix::diag(&[1e200, 1.0]);
        let overflow = &big * &big;
        assert!(matches!(spectral_norm(&overflow), Err(Error::NonFinite)));
        assert!(Matrix::new(1, 1, &[f64::NAN]).is_err());
    }

    #[test]
    fn spectral_radius_cases() {
        let nil = Matrix::new(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(spectral_radius(&nil).unwrap().abs() < 1e-12);

        let a = reference_family();
        assert!((spectral_radius(&a[0]).unwrap() - 1.3276544).abs() < 1e-5);
        let combo = &matrix_power(&a[0], 2).unwrap() * &matrix_power(&a[2], 2).unwrap();
        assert!((spectral_radius(&combo).unwrap() - 0.3527252).abs() < 1e-5);
    }

    #[test]
    fn spectral_radius_rejects_non_square() {
        let m = Matrix::new(2, 3, &[0.0; 6]).unwrap();
        assert!(matches!(spectral_radius(&m), Err(Error::NotSquare { .. })));
        assert!(is_schur(&m).is_err());
        assert!(matrix_power(&m, 2).is_err());
    }

    #[test]
    fn schur_classification() {
        let a = reference_family();
        let combo = &matrix_power(&a[0], 2).unwrap() * &matrix_power(&a[2], 2).unwrap();
        assert!(is_schur(&combo).unwrap());
        assert!(!is_schur(&a[1]).unwrap());
        assert!(!is_schur(&Matrix::identity(3)).unwrap());
    }

    #[test]
    fn matrix_power_cases() {
        let a = reference_family();
        assert_eq!(matrix_power(&a[3], 0).unwrap(), Matrix::identity(2));
        assert_eq!(
            matrix_power(&Matrix::diag(&[2.0, 3.0]), 3).unwrap(),
            Matrix::diag(&[8.0, 27.0])
        );
        let sq = matrix_power(&a[0], 2).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let direct: f64 = (0..2).map(|k| a[0].get(r, k) * a[0].get(k, c)).sum();
                assert!((sq.get(r, c) - direct).abs() < 1e-12);
            }
        }
    }

    fn square(d: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| Matrix::new(d, d, &v).unwrap())
    }

    fn square_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
        (1usize..=6).prop_flat_map(|d| (square(d), square(d)))
    }

    proptest! {
        #[test]
        fn spectral_norm_is_submultiplicative((a, b) in square_pair()) {
            let lhs = spectral_norm(&(&a * &b)).unwrap();
            let rhs = spectral_norm(&a).unwrap() * spectral_norm(&b).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn radius_bounded_by_norm(m in (1usize..=6).prop_flat_map(square)) {
            prop_assert!(spectral_radius(&m).unwrap() <= spectral_norm(&m).unwrap() + 1e-9);
        }

        #[test]
        fn norm_matches_power_iteration(m in (1usize..=5).prop_flat_map(square)) {
            let fast = spectral_norm(&m).unwrap();
            prop_assert!((fast - sigma_max_power(&m)).abs() <= 1e-6 * fast.max(1.0));
        }

        #[test]
        fn two_by_two_oracles(m in square(2)) {
            prop_assert!((spectral_norm(&m).unwrap() - sigma_max_2x2(&m)).abs() < 1e-12);
            prop_assert!((spectral_radius(&m).unwrap() - radius_2x2(&m)).abs() < 1e-9);
        }

        #[test]
        fn power_splits_additively(
            m in (1usize..=6).prop_flat_map(square),
            a in 0u32..=4,
            b in 0u32..=4,
        ) {
            let whole = matrix_power(&m, a + b).unwrap();
            let split = &matrix_power(&m, a).unwrap() * &matrix_power(&m, b).unwrap();
            let scale = spectral_norm(&whole).unwrap().max(1.0);
            prop_assert!(whole.max_abs_diff(&split) <= 1e-9 * scale);
        }
    }
}
