//! Numerical toolkit for Green bundles and the Aubry set of Tonelli
//! Hamiltonians on `𝕋¹` and `𝕋²`.
//!
//! * [`cones`]: Lagrangian graphs, the sign function and cone membership.
//! * [`semiconcavity`]: anisotropic semi-concavity certificates and gradient bounds.
//! * [`dynamics`]: Hamiltonian flows, frame transport and Green bundles.
//! * [`weak_kam`]: action kernels, Lax–Oleinik iteration, conjugate pairs and
//!   the paratingent-cone verification.
//! * [`export`]: CSV series for ladders, orbits and grid functions.

pub mod cones;
pub mod dynamics;
pub mod export;
pub mod linalg;
pub mod sampling;
pub mod semiconcavity;
pub mod weak_kam;

pub use cones::{ConeError, ConePair, SgValue, SymMatrix, TangentVector};
