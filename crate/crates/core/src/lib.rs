//! Periodic orbits, phase response curves and their parametric
//! sensitivities for single-input oscillator models, with metrics on the
//! quotient spaces of phase response curves.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod integrate;
pub mod interp;
pub mod metrics;
pub mod models;
pub mod orbit;
pub mod prc;
pub mod sensitivity;

pub use error::{Error, Result};
