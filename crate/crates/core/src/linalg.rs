//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::Scalar;

/// `(m + m') / 2`.
pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Pseudo-inverse of a symmetric matrix.
///
/// Eigenvalues with magnitude at most `rel_tol` times the largest magnitude
/// are treated as zero. The flag reports whether any were dropped.
pub fn pinv_symmetric<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> (DMatrix<T>, bool) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let largest = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |a, &v| a.max(v.abs()));
    let cutoff = largest * rel_tol;
    let mut dropped = false;
    let mut inv_vals = eig.eigenvalues.clone();
    for v in inv_vals.iter_mut() {
        if v.abs() <= cutoff || largest == T::zero() {
            *v = T::zero();
            dropped = true;
        } else {
            *v = T::one() / *v;
        }
    }
    let q = &eig.eigenvectors;
    let inv = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
    (symmetrize(&inv), dropped)
}

/// Inverse of a symmetric matrix, falling back to the pseudo-inverse.
pub fn inverse_symmetric<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> (DMatrix<T>, bool) {
    let (inv, dropped) = pinv_symmetric(m, rel_tol);
    if dropped {
        return (inv, true);
    }
    match m.clone().try_inverse() {
        Some(exact) => (symmetrize(&exact), false),
        None => (inv, true),
    }
}

/// Symmetric square root of the PSD part of `m`.
///
/// Negative eigenvalues are clipped to zero; the returned magnitude is the
/// largest absolute value clipped.
pub fn psd_root<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, T) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), T::zero());
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut clipped = T::zero();
    let roots = eig.eigenvalues.map(|v| {
        if v < T::zero() {
            clipped = clipped.max(-v);
            T::zero()
        } else {
            v.sqrt()
        }
    });
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&roots) * q.transpose(), clipped)
}

/// Numerical rank via singular values, relative to the largest one.
pub fn rank<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().fold(T::zero(), |a, &v| a.max(v));
    if largest == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&v| v > largest * rel_tol).count()
}

/// Columns that add nothing to the rank of the columns before them.
pub fn dependent_columns<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> Vec<usize> {
    let scale = m.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for k in 0..m.ncols() {
        let col_max = m.column(k).iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        if col_max <= scale * rel_tol {
            out.push(k);
            continue;
        }
        let mut trial = kept.clone();
        trial.push(k);
        let sub = m.select_columns(&trial);
        if rank(&sub, rel_tol) == trial.len() {
            kept.push(k);
        } else {
            out.push(k);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_regular_matrix_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let (inv, dropped) = pinv_symmetric(&m, 1e-10);
        assert!(!dropped);
        assert!((&m * inv - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn pinv_flags_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (inv, dropped) = pinv_symmetric(&m, 1e-10);
        assert!(dropped);
        // Moore-Penrose condition m * inv * m = m.
        assert!((&m * &inv * &m - &m).amax() < 1e-12);
    }

    #[test]
    fn psd_root_clips_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0f64, 0.0, 0.0, -0.5]);
        let (root, clipped) = psd_root(&m);
        assert_eq!(clipped, 0.5);
        let back = &root * &root;
        assert!((back[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(back[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn dependent_columns_detects_zero_and_duplicate() {
        let m = DMatrix::from_row_slice(3, 4, &[
            1.0, 0.0, 2.0, 1.0, //
            2.0, 0.0, 4.0, 0.0, //
            3.0, 0.0, 6.0, 5.0,
        ]);
        assert_eq!(dependent_columns(&m, 1e-10), vec![1, 2]);
        assert_eq!(rank(&m, 1e-10), 2);
    }
}
