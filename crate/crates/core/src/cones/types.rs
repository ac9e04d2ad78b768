use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ConeError, TOL_ORDER};
use crate::linalg;

/// Dense real symmetric matrix, read as the Lagrangian graph `{(h, Sh)}`.
///
/// Construction symmetrizes the input, so the symmetry defect is always at
/// roundoff level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, ConeError> {
        if m.nrows() != m.ncols() {
            return Err(ConeError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        Ok(Self(linalg::symmetrize(&m)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scalar(s: f64) -> Self {
        Self(DMatrix::from_element(1, 1, s))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    /// Row-major entries; panics unless `entries.len() == n * n`.
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Self {
        Self(linalg::symmetrize(&DMatrix::from_row_slice(n, n, entries)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.0[(i, j)]).collect()
    }

    /// Ascending eigenvalues and matching eigenvectors.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        linalg::sorted_sym_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return f64::INFINITY;
        }
        self.eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return f64::NEG_INFINITY;
        }
        let vals = self.eigen().0;
        vals[vals.len() - 1]
    }

    /// Spectral norm.
    pub fn norm2(&self) -> f64 {
        linalg::sym_op_norm(&self.0)
    }

    /// `self ≤ other` in the Loewner order, up to `tol`.
    pub fn le(&self, other: &SymMatrix, tol: f64) -> bool {
        (other - self).min_eigenvalue() >= -tol
    }

    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.min_eigenvalue() > tol
    }

    /// `S + cI`.
    pub fn shifted(&self, c: f64) -> SymMatrix {
        let n = self.dim();
        Self(&self.0 + DMatrix::identity(n, n) * c)
    }

    /// `AᵀSA`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> SymMatrix {
        Self(linalg::symmetrize(&(a.transpose() * &self.0 * a)))
    }

    /// Principal square root; negative roundoff eigenvalues are clamped to zero.
    pub fn sqrt_psd(&self) -> SymMatrix {
        Self(linalg::psd_sqrt(&self.0))
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }

    /// `xᵀSx`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        let n = s.dim();
        (0..n).map(|i| (0..n).map(|j| s.0[(i, j)]).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = ConeError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(ConeError::NotSquare { rows: n, cols: bad.len() });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(SymMatrix::from_row_slice(n, &flat))
    }
}

impl<'a> Add<&'a SymMatrix> for &'a SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a SymMatrix> for &'a SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

/// A vector `v = (h, k)` of `ℝⁿ × ℝⁿ`: `h` is the base component, `k` the fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub h: DVector<f64>,
    pub k: DVector<f64>,
}

impl TangentVector {
    pub fn new(h: DVector<f64>, k: DVector<f64>) -> Result<Self, ConeError> {
        if h.len() != k.len() {
            return Err(ConeError::DimensionMismatch { expected: h.len(), found: k.len() });
        }
        Ok(Self { h, k })
    }

    pub fn from_slices(h: &[f64], k: &[f64]) -> Result<Self, ConeError> {
        Self::new(DVector::from_row_slice(h), DVector::from_row_slice(k))
    }

    pub fn zeros(n: usize) -> Self {
        Self { h: DVector::zeros(n), k: DVector::zeros(n) }
    }

    /// The graph vector `(h, Sh)`.
    pub fn on_graph(s: &SymMatrix, h: DVector<f64>) -> Self {
        let k = s.apply(&h);
        Self { h, k }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn norm(&self) -> f64 {
        (self.h.norm_squared() + self.k.norm_squared()).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { h: &self.h * c, k: &self.k * c }
    }

    /// Unit vector in the same direction; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / n)
        }
    }

    /// Concatenation `(h, k)` as one vector of length `2n`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.h.iter().chain(self.k.iter()).copied().collect()
    }
}

impl<'a> Add<&'a TangentVector> for &'a TangentVector {
    type Output = TangentVector;
    fn add(self, rhs: &TangentVector) -> TangentVector {
        TangentVector { h: &self.h + &rhs.h, k: &self.k + &rhs.k }
    }
}

impl<'a> Sub<&'a TangentVector> for &'a TangentVector {
    type Output = TangentVector;
    fn sub(self, rhs: &TangentVector) -> TangentVector {
        TangentVector { h: &self.h - &rhs.h, k: &self.k - &rhs.k }
    }
}

/// Ordered pair `S₁ ≤ S₂`, the boundary data of the cone `C(S₁, S₂)`.
///
/// The eigen-decomposition of `U = S₂ − S₁` is cached; its rank is detected
/// against `TOL_ORDER` relative to the size of the operands, and eigenvalues
/// that fall too close to that threshold are rejected rather than guessed.
#[derive(Debug, Clone)]
pub struct ConePair {
    s1: SymMatrix,
    s2: SymMatrix,
    u: SymMatrix,
    u_vals: DVector<f64>,
    u_vecs: DMatrix<f64>,
    rank: usize,
    rank_threshold: f64,
}

/// Eigenvalues inside `[threshold / AMBIGUITY_BAND, threshold * AMBIGUITY_BAND]`
/// make the rank of `U` ambiguous.
const AMBIGUITY_BAND: f64 = 100.0;

impl ConePair {
    pub fn new(s1: SymMatrix, s2: SymMatrix) -> Result<Self, ConeError> {
        if s1.dim() != s2.dim() {
            return Err(ConeError::DimensionMismatch { expected: s1.dim(), found: s2.dim() });
        }
        let u = &s2 - &s1;
        let (u_vals, u_vecs) = u.eigen();
        let scale = u.norm2().max(s1.norm2()).max(s2.norm2());
        let rank_threshold = TOL_ORDER * scale;
        if let Some(&lmin) = u_vals.as_slice().first() {
            if lmin < -rank_threshold.max(TOL_ORDER) {
                return Err(ConeError::NotOrdered { min_eigenvalue: lmin });
            }
        }
        for &l in u_vals.iter() {
            if l.abs() > rank_threshold / AMBIGUITY_BAND && l.abs() <= rank_threshold * AMBIGUITY_BAND {
                return Err(ConeError::RankDetectionAmbiguous { eigenvalue: l, threshold: rank_threshold });
            }
        }
        let rank = u_vals.iter().filter(|&&l| l > rank_threshold).count();
        Ok(Self { s1, s2, u, u_vals, u_vecs, rank, rank_threshold })
    }

    pub fn dim(&self) -> usize {
        self.s1.dim()
    }

    pub fn s1(&self) -> &SymMatrix {
        &self.s1
    }

    pub fn s2(&self) -> &SymMatrix {
        &self.s2
    }

    /// `U = S₂ − S₁`.
    pub fn u(&self) -> &SymMatrix {
        &self.u
    }

    /// Numerical rank `m` of `U`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_threshold(&self) -> f64 {
        self.rank_threshold
    }

    /// `U` positive definite, i.e. the two graphs are transversal.
    pub fn is_transversal(&self) -> bool {
        self.rank == self.dim()
    }

    /// Ascending eigenvalues of `U` and their eigenvectors. The kernel
    /// directions are the first `n − m` columns.
    pub fn u_eigen(&self) -> (&DVector<f64>, &DMatrix<f64>) {
        (&self.u_vals, &self.u_vecs)
    }

    /// Orthonormal basis of `ker U` (columns).
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.u_vecs.columns(0, n - self.rank).into_owned()
    }

    /// Orthonormal basis of `range U` (columns).
    pub fn range_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.u_vecs.columns(n - self.rank, self.rank).into_owned()
    }

    /// Moore–Penrose pseudo-inverse of `U` applied to `x`.
    pub(crate) fn u_pinv_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for j in (n - self.rank)..n {
            let col = self.u_vecs.column(j);
            let c = col.dot(x) / self.u_vals[j];
            out.axpy(c, &col, 1.0);
        }
        out
    }

    /// Component of `x` in `ker U`.
    pub(crate) fn kernel_component(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for j in 0..(n - self.rank) {
            let col = self.u_vecs.column(j);
            out.axpy(col.dot(x), &col, 1.0);
        }
        out
    }
}
