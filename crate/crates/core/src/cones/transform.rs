use nalgebra::DMatrix;

use super::{ConeError, ConePair, SymMatrix, TangentVector};
use crate::linalg;

/// Condition number beyond which a linear change of base is treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Shear `(h, k) ↦ (h, k + Ch)`; maps the graph of `S` to the graph of `S + CI`.
pub fn phi_shear(c: f64, v: &TangentVector) -> TangentVector {
    TangentVector { h: v.h.clone(), k: &v.k + &v.h * c }
}

/// Change of base `(h, k) ↦ (A⁻¹h, Aᵀk)`; maps the graph of `S` to the graph of `AᵀSA`.
#[derive(Debug, Clone)]
pub struct GlMap {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    condition: f64,
}

impl GlMap {
    pub fn new(a: DMatrix<f64>) -> Result<Self, ConeError> {
        if a.nrows() != a.ncols() {
            return Err(ConeError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let condition = linalg::condition_number(&a);
        if !(condition < MAX_CONDITION) {
            return Err(ConeError::SingularMatrix { condition });
        }
        let a_inv = a.clone().try_inverse().ok_or(ConeError::SingularMatrix { condition })?;
        Ok(Self { a, a_inv, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn apply(&self, v: &TangentVector) -> TangentVector {
        TangentVector { h: &self.a_inv * &v.h, k: self.a.transpose() * &v.k }
    }

    pub fn map_graph(&self, s: &SymMatrix) -> SymMatrix {
        s.congruence(&self.a)
    }

    pub fn map_pair(&self, pair: &ConePair) -> Result<ConePair, ConeError> {
        ConePair::new(self.map_graph(pair.s1()), self.map_graph(pair.s2()))
    }
}

/// One-shot form of [`GlMap::apply`].
pub fn phi_gl(a: &DMatrix<f64>, v: &TangentVector) -> Result<TangentVector, ConeError> {
    Ok(GlMap::new(a.clone())?.apply(v))
}
