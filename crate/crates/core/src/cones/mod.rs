//! Linear-symplectic algebra of Lagrangian graphs.
//!
//! A symmetric matrix `S` stands for the Lagrangian subspace `{(h, Sh)}` of
//! `ℝⁿ × ℝⁿ`. Two ordered graphs `S₁ ≤ S₂` bound the cone
//! `C(S₁, S₂) = {(h, Sh) : S₁ ≤ S ≤ S₂}`, and membership in that cone is
//! decided by the sign of [`sg_value`], the symplectic pairing of the two
//! components of `v` split along the two graphs.

mod decompose;
mod distance;
mod reduce;
mod sg;
mod transform;
mod types;
mod witness;

pub use decompose::decompose_nonneg;
pub use distance::{cone_distance, subspace_distance};
pub use reduce::{reduce_degenerate, ReducedPair};
pub use sg::{cone_contains, omega, sg_from_split, sg_split, sg_value, SgValue};
pub use transform::{phi_gl, phi_shear, GlMap};
pub use types::{ConePair, SymMatrix, TangentVector};
pub use witness::{cone_witness, validate_witness, WitnessCheck};

use thiserror::Error;

/// Ordering tolerance: `S₁ ≤ S₂` when `λ_min(S₂ − S₁) ≥ −TOL_ORDER`.
pub const TOL_ORDER: f64 = 1e-10;
/// Maximum symmetry defect tolerated for matrices handed to [`SymMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("pair is not ordered: min eigenvalue of S2 - S1 is {min_eigenvalue:e}")]
    NotOrdered { min_eigenvalue: f64 },
    #[error("y1·y2 = {inner:e} is negative")]
    NegativeInnerProduct { inner: f64 },
    #[error("no witness: Sg = {sg} < 0, vector lies outside the cone")]
    NoWitness { sg: f64 },
    #[error("matrix is singular (condition number {condition:e})")]
    SingularMatrix { condition: f64 },
    #[error("rank of S2 - S1 is ambiguous: eigenvalue {eigenvalue:e} straddles threshold {threshold:e}")]
    RankDetectionAmbiguous { eigenvalue: f64, threshold: f64 },
    #[error("degenerate reduction failed validation (block defect {defect:e})")]
    ReductionFailed { defect: f64 },
}
