//! Quantum-circuit DDPG for load-frequency control.
//!
//! The crate is organised bottom-up:
//! - [`qsim`]: dense statevector simulation over {R_Y, R_Z, CNOT};
//! - [`ansatz`]: the layered re-uploading circuit and its evaluation;
//! - [`gradients`]: parameter-shift, adjoint and finite-difference derivatives;
//! - [`noise`]: fake-backend depolarizing/readout/shot noise;
//! - [`lfc`]: the multi-machine load-frequency-control environment and PI-AGC baseline;
//! - [`agent`]: quantum actor/critic, replay buffer and the DDPG training loop;
//! - [`config`]: the experiment configuration tree.

pub mod agent;
pub mod ansatz;
pub mod config;
pub mod error;
pub mod gradients;
pub mod lfc;
pub mod noise;
pub mod qsim;
