//! Link-level simulation of a multi-user MIMO downlink under correlated
//! jamming with time-varying correlations, and an LSTM dueling Q-learning
//! agent that tunes the nullspace-estimation and data-transmission phase
//! durations.
//!
//! Module map:
//!
//! - [`numerics`]: complex linear algebra, seeded Gaussian sampling.
//! - [`channel`]: ULA steering vectors, COST 231 Hata path loss, sum-of-sinusoids fading.
//! - [`jamming`]: correlation schedules, jamming synthesis, virtual-change factor.
//! - [`beamform`]: covariance, SVD nullspace, zero forcing, SINR estimation, closed-form bounds.
//! - [`env`]: the frame-level decision process (observations, history, rewards, metrics).
//! - [`agent`]: LSTM dueling Q-network with analytic backpropagation, replay, trainer.
//! - [`policies`]: upper-bound, fixed, heuristic and learned policies.
//! - [`harness`]: configuration, training/evaluation drivers, CSV output.

pub mod agent;
pub mod beamform;
pub mod channel;
pub mod env;
mod error;
pub mod harness;
pub mod jamming;
pub mod numerics;
pub mod policies;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ComplexVector, Rng};
