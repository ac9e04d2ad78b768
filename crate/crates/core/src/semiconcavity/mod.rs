//! Anisotropic semi-concavity.
//!
//! `f` is `A`-semi-concave when `f(y) − f(x) − l_x·(y − x) ≤ ½A(y − x)²` for
//! some super-gradient `l_x`; equivalently `f − ½Ax²` is concave. For a
//! `B`-semi-concave `f` above a function `g` with `g − ½Ax²` convex, the
//! gradients on `argmin(f − g)` obey a ball bound in the norms of
//! `U = B − A`, and that ball is exactly the cone `C(A, B)`.

mod aniso;
mod certificates;
mod norms;
mod paratingent;
pub mod synthetic;

pub use aniso::{
    aniso_gradient_bound, argmin_threshold, ball_cone_membership, ball_margin, AnisoBound, ArgminSet,
    GradientBoundReport,
};
pub use certificates::{
    check_semiconcave, check_semiconvex, midpoint_concavity_violations, CertificateReport, SampledFunction,
    SamplePoint, Violation,
};
pub use norms::{uinv_norm, unorm};
pub use paratingent::{empirical_paratingent, torus_delta, ParatingentDirection, PhaseSample};

use thiserror::Error;

use crate::cones::ConeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiconcavityError {
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no sample pair at distance within [{min:e}, {max:e}]")]
    EmptyWindow { min: f64, max: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error(transparent)]
    Cone(#[from] ConeError),
}
