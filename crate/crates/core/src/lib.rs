//! Jamming detection on unused pilots in massive MIMO uplinks.
//!
//! - [`model`] simulates the pilot phase under a multi-antenna jammer and
//!   projects each block onto the pilots no user holds.
//! - [`detector`] implements the GLRT on those projections: ML estimate of the
//!   effective jamming power, and a threshold decision.
//! - [`analysis`] gives exact and large-array false-alarm and detection
//!   probabilities, threshold inversion, and the large-array spectral
//!   efficiency under jamming.
//! - [`montecarlo`] runs reproducible parallel trials and parameter sweeps.

pub mod analysis;
pub mod detector;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod rng;

pub use error::{Error, Result};
