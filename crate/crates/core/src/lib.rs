//! l1-ball priors for Bayesian sparse inference.
//!
//! A continuous latent `β` is pushed through the Euclidean projection onto an
//! l1-ball of radius `r`, giving a parameter `θ` with exact zeros. The crate
//! provides the projections, closed-form prior kernels, a NUTS sampler that
//! differentiates through the projection, model plugins and posterior
//! summaries.

pub mod error;
pub mod models;
pub mod parallel;
pub mod priors;
pub mod projection;
pub mod sampler;
pub mod stats;
pub mod summaries;

pub use error::{Error, Result};
pub use parallel::Execution;
