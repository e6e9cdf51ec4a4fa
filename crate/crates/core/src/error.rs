//! Error types shared by the queueing engine and the solver.

use crate::network::Topology;
use crate::profile::CurveError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("service rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("preference must lie in the open interval (0, 1), got {0}")]
    InvalidPreference(f64),
    #[error("class mass must be non-negative and finite, got {0}")]
    InvalidMass(f64),
    #[error("operation requires topology {expected:?}, got {got:?}")]
    TopologyMismatch { expected: Topology, got: Topology },
    #[error("class {class} mass {got} does not match expected {expected}")]
    MassMismatch { class: u8, expected: f64, got: f64 },
    #[error("infeasible convex-set descriptor: {0}")]
    InfeasibleDescriptor(String),
    #[error("arrival profile must start from zero mass")]
    NonZeroInitialMass,
    #[error("queue never drains; engaged set is unbounded")]
    UnboundedQueue,
    #[error("curves carry different total masses: {0} vs {1}")]
    DistanceMassMismatch(f64, f64),
    #[error(transparent)]
    Curve(#[from] CurveError),
}
