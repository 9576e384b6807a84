//! Estimators and bootstrap schemes for AR(1), heteroscedastic AR(1) and
//! ARCH(p) series, with a Monte-Carlo harness for checking limit laws.

pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod processes;
pub mod rand_weights;
pub mod stats;

pub use error::{Error, Result};
