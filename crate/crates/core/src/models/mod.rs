//! Likelihoods and sampler plug-ins built on the projected prior.
//!
//! Every model implements [`Model`](crate::sampler::Model): it owns its data
//! and prior configuration, is shared read-only across chains, and hands each
//! chain a [`Target`](crate::sampler::Target) whose position vector is the
//! unconstrained latent `β`, the radius parameters and any nuisance
//! parameters on the log scale.
//!
//! | name          | parameter                     | ball                 |
//! |---------------|-------------------------------|----------------------|
//! | `regression`  | coefficients                  | vector               |
//! | `prior`       | none (prior simulation)       | vector               |
//! | `fused`       | pixel intensities             | `‖Dθ‖₁`, grid `D`    |
//! | `mixture`     | mixture weights               | vector, then simplex |
//! | `lowrank`     | background and sparse frames  | nuclear and vector   |
//! | `structured`  | factor loadings and scales    | vector, twice        |

mod fused;
mod lowrank;
mod mixture;
mod prior_only;
mod regression;
mod structured;

pub use fused::{fused_target, FusedModel, GridData};
pub use lowrank::{lowrank_sparse_target, LowRankSparseData, LowRankSparseModel};
pub use mixture::{mixture_log_lik, mixture_weights_from_ball, MixtureData, MixtureModel};
pub use prior_only::PriorOnlyModel;
pub use regression::{regression_log_lik_grad, RegressionData, RegressionLikelihood, RegressionModel};
pub use structured::{structured_base_covariance, structured_sparsity_target, StructuredData, StructuredModel};

use crate::error::{Error, Result};
use crate::priors::{radius_from_quantile, RadiusPrior, UnconstrainedRadius};
use crate::projection::{project_l1_ball, soft_threshold};
use crate::sampler::{vector_vjp, BallPoint, ProjectionVjp};

/// Registered model names and the data each one reads.
pub const MODEL_SCHEMAS: &[(&str, &str)] = &[
    ("regression", "X.csv (n×p, header x1..xp), y.csv (n×1, header y)"),
    ("prior", "none"),
    ("fused", "image.csv (p1×p2, header c1..cp2)"),
    ("mixture", "y.csv (n×1, header y)"),
    ("lowrank", "frames.bin (frame stack: T frames of m×n)"),
    ("structured", "A.csv (p×p), S.csv (p×p, entries 0/1)"),
];

/// How a ball's radius enters the position vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusModel {
    Fixed(f64),
    /// One unconstrained coordinate: `log r`, or `logit w` for the
    /// quantile-dependent radius.
    Random(RadiusPrior),
}

impl RadiusModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed(r) if *r > 0.0 && r.is_finite() => Ok(()),
            Self::Fixed(r) => Err(Error::Config(format!("fixed radius must be positive, got {r}"))),
            Self::Random(prior) => prior.validate(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Self::Fixed(_) => 0,
            Self::Random(_) => 1,
        }
    }

    pub fn is_quantile_dependent(&self) -> bool {
        matches!(self, Self::Random(p) if p.is_quantile_dependent())
    }

    /// Rejects the quantile-dependent prior for balls it is not defined on.
    pub(crate) fn require_explicit(&self, what: &str) -> Result<()> {
        if self.is_quantile_dependent() {
            return Err(Error::Config(format!("{what} needs an explicit radius prior, not the quantile-dependent one")));
        }
        self.validate()
    }

    /// Radius (or `w`), its log density on the sampled scale and gradient.
    pub(crate) fn eval(&self, u: &[f64]) -> UnconstrainedRadius {
        match self {
            Self::Fixed(r) => UnconstrainedRadius { value: *r, log_density: 0.0, grad: 0.0 },
            Self::Random(prior) => prior.unconstrained(u[0]),
        }
    }

    /// Unconstrained coordinates placing the radius (or `w`) at `value`.
    pub(crate) fn init(&self, value: f64) -> Vec<f64> {
        match self {
            Self::Fixed(_) => Vec::new(),
            Self::Random(prior) => vec![prior.to_unconstrained(value)],
        }
    }
}

/// `Inverse-Gamma(shape, rate)` prior on a variance, sampled as `s = log σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub rate: f64,
}

impl Default for InverseGamma {
    fn default() -> Self {
        Self { shape: 1.0, rate: 1.0 }
    }
}

impl InverseGamma {
    pub fn validate(&self) -> Result<()> {
        if self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("inverse-gamma parameters must be positive: {self:?}")))
        }
    }

    /// Log density of `s = log σ²` (including the Jacobian) and its derivative.
    pub fn log_density_log_scale(&self, s: f64) -> (f64, f64) {
        let (a, b) = (self.shape, self.rate);
        let e = (-s).exp();
        (a * b.ln() - statrs::function::gamma::ln_gamma(a) - a * s - b * e, -a + b * e)
    }
}

/// Observation noise: a known variance or an inverse-gamma prior on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisePrior {
    Known(f64),
    InverseGamma(InverseGamma),
}

impl NoisePrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Known(v) if *v > 0.0 && v.is_finite() => Ok(()),
            Self::Known(v) => Err(Error::Config(format!("noise variance must be positive, got {v}"))),
            Self::InverseGamma(ig) => ig.validate(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Self::Known(_) => 0,
            Self::InverseGamma(_) => 1,
        }
    }

    /// `(σ², log prior, d log prior / ds)` from the optional `s = log σ²` slot.
    pub(crate) fn eval(&self, s: &[f64]) -> (f64, f64, f64) {
        match self {
            Self::Known(v) => (*v, 0.0, 0.0),
            Self::InverseGamma(ig) => {
                let (lp, g) = ig.log_density_log_scale(s[0]);
                (s[0].exp(), lp, g)
            }
        }
    }
}

/// Fails on a finite-difference VJP that straddled a non-differentiable point.
pub(crate) fn reject_kink(vjp: &ProjectionVjp) -> Result<()> {
    if vjp.kink {
        Err(Error::Degenerate("projection Jacobian is not defined within the finite-difference step".into()))
    } else {
        Ok(())
    }
}

pub(crate) fn count_nonzero(xs: &[f64]) -> usize {
    xs.iter().filter(|&&x| x != 0.0).count()
}

pub(crate) fn check_position(q: &[f64], dim: usize) -> Result<()> {
    if q.len() != dim {
        return Err(Error::Input(format!("position has length {}, expected {dim}", q.len())));
    }
    crate::error::ensure_finite(q, "position")
}

/// `θ = P(β, r)` on the vector ball, with `r` fixed, sampled, or set by the
/// quantile-dependent rule `r = Σ(|β_i| − μ̃)₊`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VectorLayer {
    pub point: BallPoint,
    pub r: f64,
    pub radius: UnconstrainedRadius,
    /// Index of `β` supplying `μ̃` under the quantile-dependent radius.
    pub threshold_index: Option<usize>,
    pub mu_tilde: Option<f64>,
}

impl VectorLayer {
    pub fn new(beta: &[f64], model: &RadiusModel, u: &[f64]) -> Result<Self> {
        let radius = model.eval(u);
        if !model.is_quantile_dependent() {
            let res = project_l1_ball(beta, radius.value)?;
            let point = BallPoint { theta: res.theta, support: res.active_set, boundary: res.boundary, exact: true };
            return Ok(Self { point, r: radius.value, radius, threshold_index: None, mu_tilde: None });
        }
        let (mu_tilde, r) = radius_from_quantile(beta, radius.value)?;
        let k = beta
            .iter()
            .position(|b| b.abs() == mu_tilde)
            .expect("the threshold is one of the magnitudes");
        let theta: Vec<f64> = beta.iter().map(|&b| soft_threshold(b, mu_tilde)).collect();
        let support = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
        let point = BallPoint { theta, support, boundary: true, exact: true };
        Ok(Self { point, r, radius, threshold_index: Some(k), mu_tilde: Some(mu_tilde) })
    }

    /// Returns `(∂θ/∂β)ᵀg` and `gᵀ∂θ/∂u` for the radius coordinate.
    pub fn vjp(&self, beta: &[f64], g: &[f64]) -> (Vec<f64>, f64) {
        match self.threshold_index {
            None => {
                let v = vector_vjp(beta, &self.point, g);
                // u = log r
                (v.beta, v.radius * self.r)
            }
            Some(k) => {
                let sign = |i: usize| if beta[i] < 0.0 { -1.0 } else { 1.0 };
                let mut out = vec![0.0; beta.len()];
                let mut sg = 0.0;
                for &i in &self.point.support {
                    out[i] = g[i];
                    sg += g[i] * sign(i);
                }
                out[k] -= sign(k) * sg;
                (out, 0.0)
            }
        }
    }
}
