use super::decompose::split_identity;
use super::{reduce_degenerate, sg_from_split, sg_split, ConeError, ConePair, SymMatrix, TangentVector};

/// Roundoff band below zero in which `Sg(v)` still counts as nonnegative,
/// relative to `(1 + ‖S₁‖ + ‖U‖)‖v‖²`.
pub(crate) const WITNESS_SLACK: f64 = 1e-12;

/// Constructive membership: a symmetric `S` with `S₁ ≤ S ≤ S₂` and `Sh = k`,
/// or [`ConeError::NoWitness`] when `Sg(v) < 0`.
///
/// For a transversal pair, with `yᵢ = U^{1/2}xᵢ` from the splitting of `v`,
/// `Sg(v) = y₁·y₂ ≥ 0` lets [`decompose_nonneg`](super::decompose_nonneg)
/// produce `W` with `W(y₁ + y₂) = y₂`; then `S = S₁ + U^{1/2} W U^{1/2}`.
/// Degenerate pairs go through [`reduce_degenerate`] first.
pub fn cone_witness(pair: &ConePair, v: &TangentVector) -> Result<SymMatrix, ConeError> {
    if !pair.is_transversal() {
        return reduce_degenerate(pair)?.witness(v);
    }
    let (x1, x2) = sg_split(pair, v)?.expect("transversal pairs span everything");
    let sg = sg_from_split(pair, &x1, &x2);
    let slack = WITNESS_SLACK * (1.0 + pair.s1().norm2() + pair.u().norm2()) * v.norm().powi(2);
    if sg < -slack {
        return Err(ConeError::NoWitness { sg });
    }
    let root = pair.u().sqrt_psd();
    let y1 = root.apply(&x1);
    let y2 = root.apply(&x2);
    let (w_for_y2, _) = split_identity(&y2, &y1);
    let u1 = SymMatrix::new(root.matrix() * w_for_y2.matrix() * root.matrix())?;
    Ok(pair.s1() + &u1)
}

/// Post-condition check of a witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    /// `λ_min(S − S₁)`.
    pub lower_margin: f64,
    /// `λ_min(S₂ − S)`.
    pub upper_margin: f64,
    /// `‖Sh − k‖`.
    pub residual: f64,
    pub valid: bool,
}

/// Validate `S₁ ≤ S ≤ S₂` and `Sh = k` within `tol`, scaled by the size of
/// the data.
pub fn validate_witness(pair: &ConePair, v: &TangentVector, s: &SymMatrix, tol: f64) -> WitnessCheck {
    let lower_margin = (s - pair.s1()).min_eigenvalue();
    let upper_margin = (pair.s2() - s).min_eigenvalue();
    let residual = (s.apply(&v.h) - &v.k).norm();
    let mscale = 1.0 + pair.s1().norm2().max(pair.s2().norm2());
    let vscale = v.h.norm() * mscale + v.k.norm();
    let valid = lower_margin >= -tol * mscale && upper_margin >= -tol * mscale && residual <= tol * vscale.max(1.0);
    WitnessCheck { lower_margin, upper_margin, residual, valid }
}
