use nalgebra::{DMatrix, DVector};

use super::{ConeError, SymMatrix};
use crate::linalg;

/// Relative slack on the precondition `y₁·y₂ ≥ 0`.
const INNER_SLACK: f64 = 1e-12;

/// Split the identity into two positive semi-definite parts that separate
/// `y₁` and `y₂`: returns `(W₁, W₂)` with `W₁ + W₂ = I`,
/// `W₁(y₁ + y₂) = y₁` and `W₂(y₁ + y₂) = y₂`.
///
/// With `y = y₁ + y₂` and `z = y₁ − y₂`, the condition `y₁·y₂ ≥ 0` is
/// `‖z‖ ≤ ‖y‖`. A symmetric `W` with `−I ≤ W ≤ I` and `Wy = z` is built as a
/// 2×2 reflection-type block on `span{y, z}` and zero elsewhere; then
/// `W₁ = (I + W)/2`, `W₂ = (I − W)/2`.
pub fn decompose_nonneg(y1: &DVector<f64>, y2: &DVector<f64>) -> Result<(SymMatrix, SymMatrix), ConeError> {
    if y1.len() != y2.len() {
        return Err(ConeError::DimensionMismatch { expected: y1.len(), found: y2.len() });
    }
    let inner = y1.dot(y2);
    if inner < -INNER_SLACK * y1.norm() * y2.norm() {
        return Err(ConeError::NegativeInnerProduct { inner });
    }
    Ok(split_identity(y1, y2))
}

/// Unchecked construction used by the witness code, which has already
/// decided membership through the sign function.
pub(crate) fn split_identity(y1: &DVector<f64>, y2: &DVector<f64>) -> (SymMatrix, SymMatrix) {
    let n = y1.len();
    let y = y1 + y2;
    let z = y1 - y2;
    let ynorm = y.norm();
    let w = if ynorm <= f64::MIN_POSITIVE {
        // y₁ = −y₂ with y₁·y₂ ≥ 0 forces both to vanish
        DMatrix::zeros(n, n)
    } else {
        reflection_block(&(y / ynorm), &(z / ynorm))
    };
    let id = DMatrix::<f64>::identity(n, n);
    let w1 = SymMatrix::new((&id + &w) * 0.5).expect("square");
    let w2 = SymMatrix::new((&id - &w) * 0.5).expect("square");
    (w1, w2)
}

/// Symmetric `W` with `W e = z`, eigenvalues `±‖z‖` on `span{e, z}` and zero
/// on the orthogonal complement. `e` must be a unit vector.
fn reflection_block(e: &DVector<f64>, z: &DVector<f64>) -> DMatrix<f64> {
    let n = e.len();
    // P maps e to the first basis vector and z into the first two
    let b1 = e.clone();
    let z1 = b1.dot(z);
    let mut perp = z - &b1 * z1;
    let perp_norm = perp.norm();
    let basis = if perp_norm > 1e-14 * z.norm().max(1e-300) && perp_norm > 0.0 {
        perp /= perp_norm;
        linalg::complete_orthonormal(vec![b1.clone(), perp], n)
    } else {
        linalg::complete_orthonormal(vec![b1.clone()], n)
    };
    let z2 = if basis.len() > 1 { basis[1].dot(z) } else { 0.0 };
    // W' = [[z1, z2], [z2, −z1]] ⊕ 0, W = Pᵀ W' P
    let mut w = &b1 * b1.transpose() * z1;
    if basis.len() > 1 {
        let b2 = &basis[1];
        w -= b2 * b2.transpose() * z1;
        w += (&b1 * b2.transpose() + b2 * b1.transpose()) * z2;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(y1: &[f64], y2: &[f64]) {
        let y1 = DVector::from_row_slice(y1);
        let y2 = DVector::from_row_slice(y2);
        let (w1, w2) = decompose_nonneg(&y1, &y2).unwrap();
        let y = &y1 + &y2;
        let scale = 1.0 + y.norm();
        assert!(w1.min_eigenvalue() >= -1e-10);
        assert!(w2.min_eigenvalue() >= -1e-10);
        let n = y1.len();
        assert!(linalg::max_abs(&(w1.matrix() + w2.matrix() - DMatrix::identity(n, n))) < 1e-12);
        assert!((w1.apply(&y) - &y1).norm() <= 1e-9 * scale);
        assert!((w2.apply(&y) - &y2).norm() <= 1e-9 * scale);
    }

    #[test]
    fn canonical_pair() {
        check(&[1.0, 0.0], &[0.0, 1.0]);
    }

    #[test]
    fn zero_second_component() {
        check(&[0.3, -2.0, 1.0], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn equal_components_give_half_identity() {
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let (w1, w2) = decompose_nonneg(&y, &y).unwrap();
        assert!(linalg::max_abs(&(w1.matrix() - DMatrix::identity(3, 3) * 0.5)) < 1e-15);
        assert!(linalg::max_abs(&(w2.matrix() - DMatrix::identity(3, 3) * 0.5)) < 1e-15);
    }

    #[test]
    fn both_zero() {
        let z = DVector::zeros(2);
        let (w1, _) = decompose_nonneg(&z, &z).unwrap();
        assert!(linalg::max_abs(&(w1.matrix() - DMatrix::identity(2, 2) * 0.5)) < 1e-15);
    }

    #[test]
    fn parallel_inputs_use_completion() {
        check(&[2.0, 2.0], &[1.0, 1.0]);
        check(&[3.0], &[0.5]);
    }

    #[test]
    fn negative_inner_product_rejected() {
        let err = decompose_nonneg(&DVector::from_vec(vec![1.0, 0.0]), &DVector::from_vec(vec![-1.0, 0.5])).unwrap_err();
        assert!(matches!(err, ConeError::NegativeInnerProduct { .. }));
    }
}
