//! Adaptive online Bayesian estimation of a categorical distribution from
//! locally private reports.
//!
//! Each user reports through a randomized-response mechanism whose target
//! subset is tuned to the current posterior; the posterior is tracked with
//! stochastic-gradient Langevin dynamics or Gibbs sampling.

pub mod error;
pub mod flops;
pub mod harness;
pub mod inference;
pub mod mechanism;
pub mod simplex;
pub mod utility;
pub mod validation;

pub use error::{Error, Result};
