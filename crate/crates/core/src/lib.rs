//! Time-of-day road pricing on a single-reservoir trip-based MFD network.
//!
//! The crate is organised bottom-up:
//!
//! * [`population`] synthesises heterogeneous commuters.
//! * [`toll`] holds the Gaussian-mixture toll profile and its decision-vector encoding.
//! * [`mfd`] is the event-based trip-based MFD simulator with zero-impact probes.
//! * [`dynamics`] runs departure-time choice and day-to-day learning to equilibrium.
//! * [`welfare`] turns an equilibrium into per-capita welfare figures.
//! * [`bo`] is the Gaussian-process Bayesian optimisation engine.
//! * [`experiment`] wires configuration, replications and result files together.

pub mod bo;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mfd;
pub mod population;
pub mod rng;
pub mod toll;
pub mod welfare;

pub use error::{Error, Result};
