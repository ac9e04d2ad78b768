//! Action kernels, Lax–Oleinik semigroups, weak KAM conjugate pairs and the
//! paratingent-cone verification on `𝕋¹` and `𝕋²`.

mod action;
mod conjugate;
mod grid;
mod hessian;
mod kernel;
mod lax_oleinik;
mod solve;
mod verify;

pub use action::{action, ActionContext, ActionOptions, ActionResult, MAX_TIME, MIN_SEGMENTS, MIN_TIME};
pub use conjugate::{conjugate_pair, energy_lift, ConjugateOptions, ConjugatePairData};
pub use grid::{node_coords, GridFunction, MIN_RESOLUTION};
pub use hessian::{action_hessian_check, HessianCheckOptions, HessianCheckReport};
pub use kernel::{build_kernel, ActionKernel, KERNEL_MAGIC, MAX_NODES_1D, MAX_NODES_2D};
pub use lax_oleinik::{lax_oleinik, lax_oleinik_forward};
pub use solve::{weak_kam_solve, SolveOptions, WeakKamSolution};
pub use verify::{
    local_semiconcavity_check, verify_theorem, Adversarial, DirectionCheck, LocalSemiconcavityReport, SemiconcavityOptions,
    TheoremOptions, TheoremReport,
};

use thiserror::Error;

use crate::cones::ConeError;
use crate::dynamics::DynamicsError;
use crate::semiconcavity::SemiconcavityError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakKamError {
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resolution mismatch: kernel {kernel}, grid {grid}")]
    ResolutionMismatch { kernel: usize, grid: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Semiconcavity(#[from] SemiconcavityError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}
