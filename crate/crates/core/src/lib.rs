//! Noisy multi-qubit circuit simulation.
//!
//! Gates carry Gaussian over-rotation noise. The crate simulates it three
//! ways: sampled state-vector trajectories ([`mc`]), exact Kraus-chain
//! density evolution ([`circuits::Circuit::run_density`]), and fixed-rank
//! density evolution ([`lowrank`]). It also evaluates closed-form fidelity
//! lower bounds for Grover search and the QFT ([`estimate`]).

pub mod circuits;
pub mod error;
pub mod estimate;
pub mod lowrank;
pub mod mc;
pub mod noise;
pub mod qcore;

pub use error::{Error, Result};
