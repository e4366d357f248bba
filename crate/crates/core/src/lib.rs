//! Transmit beamforming for joint radar sensing and multi-user downlink.
//!
//! The crate minimizes Cramér-Rao bounds for target estimation subject to
//! per-user SINR and total power constraints, for both point and extended
//! targets, and ships the pieces needed to check the results: a Hermitian SDP
//! solver, closed-form single-user designs, KKT/structure verifiers and a
//! Monte Carlo harness for maximum-likelihood estimators.

pub mod array_model;
pub mod designs;
pub mod metrics;
pub mod numerics;
pub mod random;
pub mod sdp;
pub mod sim;
pub mod verify;

pub use array_model::{ArrayGeometry, PointTarget};
pub use metrics::{DesignSolution, Scenario, Target};
pub use numerics::{CMatrix, CVector};
