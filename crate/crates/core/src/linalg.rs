//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative cutoff below which eigenvalues of a symmetric matrix count as zero.
pub const RANK_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Number of eigenvalues above `RANK_TOL * max eigenvalue`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let (values, _) = sym_eigen(m);
    let top = values.iter().cloned().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_TOL * top).count()
}

/// Rank-revealing factor `F` (n x q) of a PSD matrix with `F F' = m`.
///
/// Built from the eigenvectors of the retained eigenvalues, scaled by their
/// square roots.
pub fn psd_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (values, vectors) = sym_eigen(m);
    let top = values.iter().cloned().fold(0.0_f64, f64::max);
    let q = if top > 0.0 {
        values.iter().filter(|&&v| v > RANK_TOL * top).count()
    } else {
        0
    };
    let n = m.nrows();
    let factor = DMatrix::from_fn(n, q, |r, c| vectors[(r, c)] * values[c].sqrt());
    (factor, q)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    match symmetrize(m).cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => Err(Error::Singular {
            rank: numerical_rank(m),
            cols: n,
        }),
    }
}

/// Symmetric square root of a PSD matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(m);
    let d = DMatrix::from_diagonal(&values.map(|v| v.max(0.0).sqrt()));
    &vectors * d * vectors.transpose()
}

pub fn max_abs_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (values, _) = sym_eigen(m);
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs_rank_deficient_matrix() {
        let v = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 1.0, -1.0, 3.0, 0.5, 0.5]);
        let m = &v * v.transpose();
        let (f, q) = psd_factor(&m);
        assert_eq!(q, 2);
        assert!(max_abs_entry(&(&f * f.transpose() - &m)) < 1e-10);
        assert_eq!(numerical_rank(&m), 2);
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, -2.0]));
        let (values, _) = sym_eigen(&m);
        assert_eq!(values.as_slice(), &[5.0, 1.0, -2.0]);
        assert_eq!(max_abs_eigenvalue(&m), 5.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_sqrt(&m);
        assert!(max_abs_entry(&(&s * &s - &m)) < 1e-12);
    }

    #[test]
    fn singular_inverse_reports_rank() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match spd_inverse(&m) {
            Err(Error::Singular { rank, cols }) => {
                assert_eq!((rank, cols), (1, 2));
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
