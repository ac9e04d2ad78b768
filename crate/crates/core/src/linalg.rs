//! Small dense linear-algebra helpers shared by the cone, bound and dynamics code.

use nalgebra::{DMatrix, DVector};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
///
/// Column `i` of the returned matrix is the eigenvector of the `i`-th eigenvalue.
pub fn sorted_sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let (vals, _) = sorted_sym_eigen(m);
    vals[0].abs().max(vals[vals.len() - 1].abs())
}

/// Largest singular value of a general matrix.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `V f(Λ) Vᵀ` for a symmetric matrix given its eigen-decomposition.
pub fn spectral_apply(vals: &DVector<f64>, vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = f(vals[j]);
        scaled.column_mut(j).scale_mut(s);
    }
    symmetrize(&(scaled * vecs.transpose()))
}

/// Principal square root of a positive semi-definite matrix. Negative
/// eigenvalues (roundoff) are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sorted_sym_eigen(m);
    spectral_apply(&vals, &vecs, |l| l.max(0.0).sqrt())
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Complete the orthonormal family `basis` to an orthonormal basis of ℝⁿ by
/// Gram–Schmidt against the standard basis vectors.
pub fn complete_orthonormal(mut basis: Vec<DVector<f64>>, n: usize) -> Vec<DVector<f64>> {
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e / norm);
        }
    }
    basis
}
