//! Tonelli Hamiltonian flows on `𝕋ⁿ × ℝⁿ`, transport of Lagrangian frames
//! and the Green bundles `G₋ ≤ G₊`.

mod flow;
mod green;
pub mod integrator;
mod system;

pub use flow::{
    flow, flow_lifted, flow_orbit, transport_lifted, variational_transport, FlowOptions, FlowResult, LagrangianFrame,
    OrbitSample, PhasePoint, TransportResult, CONJUGATE_KAPPA,
};
pub use green::{
    green_ladder, green_limits, modified_green, pre_green, pre_green_minus, summarize_ladder, GreenResult, GreenRow,
    Monotonicity, Orientation,
};
pub use integrator::Dopri5;
pub(crate) use system::LagDerivs;
pub use system::{HamiltonianHessian, Kinetic, LagrangianJet, PotentialTerm, TonelliSystem};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integrator failed at t = {time} (step {step:e})")]
    IntegratorFailure { time: f64, step: f64 },
    #[error("momentum norm {norm:e} exceeded the bound at t = {time}")]
    BlowUp { time: f64, norm: f64 },
    #[error("conjugate point: frame meets the vertical at t = {time} (1/σ_min = {kappa:e})")]
    ConjugatePoint { time: f64, kappa: f64 },
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("Hamiltonian is not convex in p (min eigenvalue {min_eigenvalue})")]
    NotConvex { min_eigenvalue: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
