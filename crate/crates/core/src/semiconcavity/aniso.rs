use nalgebra::DVector;
use serde::Serialize;

use super::paratingent::torus_delta;
use super::{uinv_norm, unorm, SemiconcavityError};
use crate::cones::{SymMatrix, TangentVector};

/// Bounds `A < B` with `U = B − A` positive definite.
#[derive(Debug, Clone)]
pub struct AnisoBound {
    a: SymMatrix,
    b: SymMatrix,
    u: SymMatrix,
    mid: SymMatrix,
}

/// Minimal eigenvalue `U` must exceed.
const MIN_GAP: f64 = 1e-10;

impl AnisoBound {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self, SemiconcavityError> {
        if a.dim() != b.dim() {
            return Err(SemiconcavityError::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        let u = &b - &a;
        let min_eigenvalue = u.min_eigenvalue();
        if !(min_eigenvalue > MIN_GAP) {
            return Err(SemiconcavityError::NotPositiveDefinite { min_eigenvalue });
        }
        let mid = &(&a + &b) * 0.5;
        Ok(Self { a, b, u, mid })
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    pub fn u(&self) -> &SymMatrix {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Lipschitz constant of the gradient on an argmin set implied by the
    /// ball bound: `‖Δp‖ ≤ (‖½(A + B)‖ + ½λ_max(U))‖Δx‖`. For `A = −CI`,
    /// `B = CI` this is `C`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.mid.norm2() + 0.5 * self.u.max_eigenvalue()
    }
}

/// Points of `argmin(f − g)` with the common gradient `p = df(x) = dg(x)`.
#[derive(Debug, Clone, Default)]
pub struct ArgminSet {
    pub samples: Vec<(DVector<f64>, DVector<f64>)>,
    /// Coordinates live on the unit torus; differences use the shortest lift.
    pub torus: bool,
}

impl ArgminSet {
    pub fn new(samples: Vec<(DVector<f64>, DVector<f64>)>, torus: bool) -> Self {
        Self { samples, torus }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Selection threshold for argmin extraction from sampled `f − g`:
/// `min + max(10⁻⁶·range, floor)`.
pub fn argmin_threshold(values: &[f64], floor: f64) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    min + (1e-6 * (max - min)).max(floor)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GradientBoundReport {
    pub pairs_checked: usize,
    /// `min ½‖Δx‖_U − ‖Δp − ½(A + B)Δx‖_{U⁻¹}`; `+∞` when there is no pair.
    pub min_margin: f64,
    pub offending: Vec<(usize, usize, f64)>,
    /// Largest observed `‖Δp‖ / ‖Δx‖`.
    pub max_gradient_ratio: f64,
}

impl GradientBoundReport {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
    }
}

/// Evaluate `½‖Δx‖_U − ‖Δp − ½(A + B)Δx‖_{U⁻¹}` over all pairs of `K`;
/// pairs with margin below `−tol` are reported as offending.
pub fn aniso_gradient_bound(k: &ArgminSet, bound: &AnisoBound, tol: f64) -> Result<GradientBoundReport, SemiconcavityError> {
    let mut report = GradientBoundReport { min_margin: f64::INFINITY, ..Default::default() };
    for i in 0..k.samples.len() {
        for j in (i + 1)..k.samples.len() {
            let (x1, p1) = &k.samples[i];
            let (x2, p2) = &k.samples[j];
            let dx = if k.torus { torus_delta(x1, x2) } else { x2 - x1 };
            let dp = p2 - p1;
            let q = &dp - bound.mid.apply(&dx);
            let margin = 0.5 * unorm(&bound.u, &dx)? - uinv_norm(&bound.u, &q)?;
            report.pairs_checked += 1;
            report.min_margin = report.min_margin.min(margin);
            let dxn = dx.norm();
            if dxn > 0.0 {
                report.max_gradient_ratio = report.max_gradient_ratio.max(dp.norm() / dxn);
            }
            if margin < -tol {
                report.offending.push((i, j, margin));
            }
        }
    }
    Ok(report)
}

/// `¼‖h‖²_U − ‖k − ½(A + B)h‖²_{U⁻¹}`, which equals `Sg_{A,B}(h, k)`.
pub fn ball_margin(bound: &AnisoBound, v: &TangentVector) -> Result<f64, SemiconcavityError> {
    let q = &v.k - bound.mid.apply(&v.h);
    Ok(0.25 * unorm(&bound.u, &v.h)?.powi(2) - uinv_norm(&bound.u, &q)?.powi(2))
}

/// `‖k − ½(A + B)h‖_{U⁻¹} ≤ ½‖h‖_U`, evaluated in squared form with slack `tol`.
pub fn ball_cone_membership(bound: &AnisoBound, v: &TangentVector, tol: f64) -> Result<bool, SemiconcavityError> {
    Ok(ball_margin(bound, v)? >= -tol)
}
