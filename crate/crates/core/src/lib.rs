//! Simulation and verification toolkit for list-replicable learning of
//! large-margin halfspaces.

pub mod cli;
pub mod concepts;
pub mod dims;
pub mod error;
pub mod geometry;
pub mod learner;
pub mod replicability;
pub mod rounding;
pub mod svm;

pub use error::{Error, Result};
