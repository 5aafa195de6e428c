//! Estimation of the integrated spectral measure of independent,
//! non-identically distributed heavy-tailed vectors, and tests for a
//! constant extreme value dependence structure over time.

pub(crate) mod cells;
pub mod copula;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod limit;
pub mod pipeline;
pub mod rng;
pub mod sample;
pub mod stationarity;

pub use error::{Error, Result};
