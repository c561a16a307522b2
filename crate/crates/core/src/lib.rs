//! Stochastic simulation of a degenerate optical parametric oscillator with
//! a rotationally invariant cavity: orientation diffusion of the emitted
//! Hermite-Gauss mode and perfect quadrature squeezing in the orthogonal mode.
//!
//! Time is dimensionless (`gamma_s t`) throughout the dynamics and estimators.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod modes;
pub mod stochastic;

pub use config::RunConfig;
pub use dynamics::{FluctuationState, PPState};
pub use error::{Error, Result};
pub use model::{ClassicalSteadyState, ModelParams};
