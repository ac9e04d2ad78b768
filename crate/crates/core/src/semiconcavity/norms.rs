use nalgebra::DVector;

use super::SemiconcavityError;
use crate::cones::SymMatrix;

fn check_dim(u: &SymMatrix, x: &DVector<f64>) -> Result<(), SemiconcavityError> {
    if u.dim() != x.len() {
        return Err(SemiconcavityError::DimensionMismatch { expected: u.dim(), found: x.len() });
    }
    Ok(())
}

/// `‖x‖_U = √(xᵀUx)` for positive definite `U`.
pub fn unorm(u: &SymMatrix, x: &DVector<f64>) -> Result<f64, SemiconcavityError> {
    check_dim(u, x)?;
    let chol = u
        .matrix()
        .clone()
        .cholesky()
        .ok_or(SemiconcavityError::NotPositiveDefinite { min_eigenvalue: u.min_eigenvalue() })?;
    // xᵀUx = ‖Lᵀx‖²
    Ok((chol.l().transpose() * x).norm())
}

/// `‖x‖_{U⁻¹} = √(xᵀU⁻¹x)`, through a Cholesky solve rather than an explicit inverse.
pub fn uinv_norm(u: &SymMatrix, x: &DVector<f64>) -> Result<f64, SemiconcavityError> {
    check_dim(u, x)?;
    let chol = u
        .matrix()
        .clone()
        .cholesky()
        .ok_or(SemiconcavityError::NotPositiveDefinite { min_eigenvalue: u.min_eigenvalue() })?;
    // xᵀU⁻¹x = ‖L⁻¹x‖²
    let y = chol.l().solve_lower_triangular(x).expect("cholesky factor is invertible");
    Ok(y.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_euclidean() {
        let x = DVector::from_vec(vec![3.0, 4.0]);
        assert!((unorm(&SymMatrix::identity(2), &x).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(unorm(&SymMatrix::identity(2), &DVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_norms() {
        let u = SymMatrix::scalar(4.0);
        let x = DVector::from_vec(vec![3.0]);
        assert!((unorm(&u, &x).unwrap() - 6.0).abs() < 1e-15);
        assert!((uinv_norm(&u, &x).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn indefinite_rejected() {
        let u = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            unorm(&u, &DVector::zeros(2)),
            Err(SemiconcavityError::NotPositiveDefinite { .. })
        ));
    }
}
