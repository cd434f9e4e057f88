//! Implicit finite-difference solver for the generalized KdV equation on the
//! half-line, with its Kawahara (fifth-order) regularization, and a harness
//! that checks the energy estimates, weak form and uniqueness bound along
//! computed trajectories.

pub mod banded;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod grid;
pub mod model;
pub mod operators;
pub mod output;
pub mod runner;
pub mod stepper;

pub use error::{Error, Result};
