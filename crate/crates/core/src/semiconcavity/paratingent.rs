use nalgebra::DVector;
use serde::Serialize;

use super::SemiconcavityError;
use crate::cones::TangentVector;

/// Shortest representative of `b − a` on the unit torus, coordinatewise in `[−½, ½)`.
pub fn torus_delta(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    (b - a).map(|d| d - (d + 0.5).floor())
}

/// A phase point `(x, p)`; `x` is a torus coordinate when used with `torus = true`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParatingentDirection {
    pub i: usize,
    pub j: usize,
    /// Length of the difference before normalization.
    pub scale: f64,
    #[serde(skip)]
    pub direction: TangentVector,
}

/// Finite-scale paratingent directions: every normalized difference
/// `(z_i − z_j)/‖z_i − z_j‖` over ordered pairs `i ≠ j` whose length lies in
/// `[delta_min, delta_max]`. Output is ordered lexicographically by `(i, j)`.
pub fn empirical_paratingent(
    samples: &[PhaseSample],
    torus: bool,
    delta_min: f64,
    delta_max: f64,
) -> Result<Vec<ParatingentDirection>, SemiconcavityError> {
    if samples.len() < 2 {
        return Err(SemiconcavityError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut out = Vec::new();
    for (i, zi) in samples.iter().enumerate() {
        for (j, zj) in samples.iter().enumerate() {
            if i == j {
                continue;
            }
            let h = if torus { torus_delta(&zj.x, &zi.x) } else { &zi.x - &zj.x };
            let k = &zi.p - &zj.p;
            let v = TangentVector::new(h, k)?;
            let scale = v.norm();
            if scale >= delta_min && scale <= delta_max {
                out.push(ParatingentDirection { i, j, scale, direction: v.scaled(1.0 / scale) });
            }
        }
    }
    if out.is_empty() {
        return Err(SemiconcavityError::EmptyWindow { min: delta_min, max: delta_max });
    }
    Ok(out)
}
