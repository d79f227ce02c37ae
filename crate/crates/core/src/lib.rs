//! Pilot-wave trajectories and a retarded two-detector model.
//!
//! * [`wavefield`]: grid wavefunctions and a split-step propagator.
//! * [`guidance`]: guidance velocities, quantum potential, trajectories.
//! * [`experiment`]: the two-detector photon experiment, instantaneous law.
//! * [`retarded`]: the same experiment with light-speed-delayed coupling.
//! * [`ensemble`]: Born-rule ensembles and outcome statistics.
//! * [`cli`]: configuration and the command-line pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod ensemble;
pub mod equivariance;
pub mod experiment;
pub mod guidance;
pub mod numerics;
pub mod retarded;
pub mod stats;
pub mod wavefield;
