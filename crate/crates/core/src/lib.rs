//! Numerical laboratory for null-controllability of fractional heat
//! equations from exponentially thick sets in one dimension.
//!
//! * [`interval_sets`]: exact fat Cantor sets and thickness profiles.
//! * [`spectral_lab`]: spectral and observability constants on a periodic grid.
//! * [`coherent_probe`]: coherent-state test functions and the blow-up experiment.

pub mod coherent_probe;
mod error;
mod highprec;
pub mod interval_sets;
pub mod quadrature;
pub mod rational;
pub mod spectral_lab;

pub use error::{Error, Result};
