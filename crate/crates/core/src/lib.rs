//! Magneto-inductive (MI) near-field channel model with integrated sensing
//! and communication analysis.
//!
//! - [`physics`]: coupling tensor and deterministic MI-MIMO channel.
//! - [`estimation`]: Fisher information, range CRB and the sensing path.
//! - [`comms`]: symbol-level link simulation, pilot and decision-directed estimation.
//! - [`analysis`]: ToF vs coupling-gradient resolution, ISAC gain, Monte Carlo sweeps.

pub mod analysis;
pub mod comms;
pub mod error;
pub mod estimation;
pub mod physics;
pub mod seeding;

pub use error::{MiError, Result};
