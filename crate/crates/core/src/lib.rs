//! Strategic arrival games on two-queue fluid networks.
//!
//! The crate has three layers:
//!
//! * an exact engine for deterministic fluid queues driven by
//!   piecewise-linear cumulative arrival profiles ([`profile`], [`queue`],
//!   [`network`]),
//! * closed-form equilibrium arrival profiles for every parametric regime of
//!   the single-queue, tandem, parallel, heterogeneous-departure (HDS) and
//!   heterogeneous-arrival (HAS) topologies ([`solver`]),
//! * machinery that keeps the closed forms honest: a direct cost-evaluation
//!   verifier ([`verifier`]) and an independent discretized best-response
//!   oracle ([`oracle`]).

pub mod error;
pub mod network;
pub mod oracle;
pub mod profile;
pub mod queue;
pub mod solver;
pub mod verifier;

pub use error::ModelError;
pub use network::{Class, GameParams, NetworkTrace, Topology};
pub use profile::{Curve, CurveError, Knot, Support};
pub use queue::QueueTrace;
pub use solver::{ConvexSetDescriptor, EapKind, EapSolution, JointProfile, RegimeTag};
pub use verifier::VerificationReport;
