//! Stationary infinitely divisible processes built as Poisson suspensions
//! over σ-finite base systems, with Fock-space, spectral and ergodic
//! verification tools.

pub mod base_systems;
pub mod cli;
pub mod ergodic;
pub mod error;
pub mod presets;
pub mod process;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod suspension;

pub use error::{IdpError, Result};
