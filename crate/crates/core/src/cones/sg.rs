use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{ConeError, ConePair, TangentVector};

/// Value of the sign function: a real number on `L₁ + L₂`, `−∞` off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SgValue {
    Finite(f64),
    MinusInfinity,
}

impl SgValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            SgValue::Finite(x) => Some(x),
            SgValue::MinusInfinity => None,
        }
    }

    /// Float view with `−∞` for the off-sum case. Only for reporting.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_at_least(self, threshold: f64) -> bool {
        matches!(self, SgValue::Finite(x) if x >= threshold)
    }
}

/// Standard symplectic form `ω((h₁,k₁),(h₂,k₂)) = h₁·k₂ − k₁·h₂`.
pub fn omega(v: &TangentVector, w: &TangentVector) -> Result<f64, ConeError> {
    if v.dim() != w.dim() {
        return Err(ConeError::DimensionMismatch { expected: v.dim(), found: w.dim() });
    }
    Ok(v.h.dot(&w.k) - v.k.dot(&w.h))
}

/// Relative residual above which `v` is declared outside `L₁ + L₂`.
const SUM_RESIDUAL_TOL: f64 = 1e-8;

/// Split `v = v₁ + v₂` with `v₁ = (x₁, S₁x₁)` and `v₂ = (x₂, S₂x₂)`.
///
/// Returns `None` when `v ∉ L₁ + L₂`. Writing `r = k − S₁h`, a splitting
/// exists iff `r ∈ range U`, and then `x₂ = U⁺r`, `x₁ = h − x₂`. For a
/// transversal pair this is the closed form `x₁ = U⁻¹(S₂h − k)`,
/// `x₂ = U⁻¹(k − S₁h)`.
pub fn sg_split(pair: &ConePair, v: &TangentVector) -> Result<Option<(DVector<f64>, DVector<f64>)>, ConeError> {
    if v.dim() != pair.dim() {
        return Err(ConeError::DimensionMismatch { expected: pair.dim(), found: v.dim() });
    }
    let r = &v.k - pair.s1().apply(&v.h);
    if !pair.is_transversal() {
        let scale = v.h.norm() * (1.0 + pair.s1().norm2()) + v.k.norm();
        let residual = pair.kernel_component(&r).norm();
        if residual > SUM_RESIDUAL_TOL * scale {
            return Ok(None);
        }
    }
    let x2 = pair.u_pinv_apply(&r);
    let x1 = &v.h - &x2;
    Ok(Some((x1, x2)))
}

/// `ω((x₁, S₁x₁), (x₂, S₂x₂))` for an explicit splitting.
pub fn sg_from_split(pair: &ConePair, x1: &DVector<f64>, x2: &DVector<f64>) -> f64 {
    let v1 = TangentVector { h: x1.clone(), k: pair.s1().apply(x1) };
    let v2 = TangentVector { h: x2.clone(), k: pair.s2().apply(x2) };
    v1.h.dot(&v2.k) - v1.k.dot(&v2.h)
}

/// The sign function `Sg_{S₁,S₂}(v)`.
pub fn sg_value(pair: &ConePair, v: &TangentVector) -> Result<SgValue, ConeError> {
    Ok(match sg_split(pair, v)? {
        Some((x1, x2)) => SgValue::Finite(sg_from_split(pair, &x1, &x2)),
        None => SgValue::MinusInfinity,
    })
}

/// `v ∈ C(S₁, S₂)`, decided as `Sg(v) ≥ −tol`.
pub fn cone_contains(pair: &ConePair, v: &TangentVector, tol: f64) -> Result<bool, ConeError> {
    Ok(sg_value(pair, v)?.is_at_least(-tol))
}
