//! Small dense linear-algebra helpers shared by the controller and the dynamics.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Damped right pseudoinverse `Mᵀ(MMᵀ + λ²I)⁻¹`.
///
/// With `damping = 0` this is the Moore–Penrose right inverse and requires
/// full row rank.
pub fn damped_pinv(m: &DMatrix<f64>, damping: f64) -> Result<DMatrix<f64>> {
    let rows = m.nrows();
    let gram = m * m.transpose() + DMatrix::identity(rows, rows) * (damping * damping);
    invert_gram(m, gram, damping)
}

/// Damped right pseudoinverse with the damping scaled per row by the
/// diagonal of `MMᵀ`: `Mᵀ(MMᵀ + λ²·diag(MMᵀ))⁻¹`.
///
/// Used where rows carry very different units (N vs N·m per Pa), so a
/// single absolute λ would swamp the small rows.
pub fn row_scaled_damped_pinv(m: &DMatrix<f64>, damping: f64) -> Result<DMatrix<f64>> {
    let mut gram = m * m.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] *= 1.0 + damping * damping;
    }
    invert_gram(m, gram, damping)
}

fn invert_gram(m: &DMatrix<f64>, gram: DMatrix<f64>, damping: f64) -> Result<DMatrix<f64>> {
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "MMᵀ is singular at damping λ = {damping}; use λ > 0 or avoid the singular configuration"
        ))
    })?;
    Ok(m.transpose() * chol.inverse())
}

/// Eigenvalue range of a symmetric matrix, `(min, max)`.
pub fn symmetric_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub fn is_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undamped_pinv_is_right_inverse() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -0.3, 0.7, 1.1]);
        let p = damped_pinv(&m, 0.0).unwrap();
        assert!((&m * &p - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_without_damping_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(damped_pinv(&m, 0.0), Err(Error::Numerical(_))));
        assert!(damped_pinv(&m, 1e-3).is_ok());
    }

    #[test]
    fn row_scaling_preserves_tiny_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1e-7, 0.0, 0.0, 1e3]);
        let p = row_scaled_damped_pinv(&m, 1e-3).unwrap();
        let prod = &m * &p;
        assert!((prod[(0, 0)] - 1.0).abs() < 1e-5);
        assert!((prod[(1, 1)] - 1.0).abs() < 1e-5);
    }
}
