//! No-U-Turn Hamiltonian Monte Carlo over the unconstrained position
//! `q = (β, radius parameter, nuisances)`, differentiating through the
//! projection.
//!
//! A [`Model`] is shared read-only across chains; each chain builds its own
//! [`Target`], which may keep mutable scratch state (for example ADMM warm
//! starts) without breaking determinism.

mod adapt;
mod gradient;
mod nuts;

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use adapt::{DualAveraging, WindowedAdaptation};
pub(crate) use gradient::vector_vjp;
pub use gradient::{gradient_through_projection, BallPoint, ProjectionVjp, ProjectionWorkspace, GRADIENT_FD_STEP};
pub use nuts::{ebfmi, leapfrog, nuts_sample, run_chains, ChainOutput, ChainState, NutsConfig, TransitionStats};

use crate::error::Result;

/// Projected quantities reported for one position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Draw {
    /// The latent vector that was projected.
    pub beta: Vec<f64>,
    /// The projected, exactly sparse parameter.
    pub theta: Vec<f64>,
    pub r: f64,
    pub extras: BTreeMap<String, f64>,
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub extras: BTreeMap<String, f64>,
    /// Log target density at the draw (the posterior kernel on the sampled scale).
    pub log_posterior: f64,
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

/// Per-chain log density with gradient.
pub trait Target {
    fn dim(&self) -> usize;

    /// Returns `log π(q)` and writes its gradient into `grad`. An error marks
    /// the point as unusable; the sampler treats it as a divergence.
    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Maps a position to the quantities stored in a [`SampleRecord`].
    fn draw(&mut self, q: &[f64]) -> Result<Draw>;
}

/// A posterior that can spawn independent per-chain targets.
pub trait Model: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn make_target(&self) -> Result<Box<dyn Target + '_>>;
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}
