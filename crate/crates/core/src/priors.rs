//! Base distributions for `β`, radius priors, and the closed-form laws the
//! projected prior induces (cardinality pmfs, boundary kernel, adaptive zero
//! probabilities).
//!
//! All pmfs are evaluated in log space through `ln Γ`, so they stay finite for
//! `p` in the hundreds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Cauchy, Distribution, Exp, Normal, StandardNormal};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{ensure_finite, ensure_radius, Error, Result};
use crate::parallel::{map_reduce, Execution};
use crate::projection::{project_l1_ball, INTERIOR_RTOL};
use crate::stats::lower_order_statistic;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with a cached Cholesky factor of its covariance.
#[derive(Debug, Clone)]
pub struct GaussianBase {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianBase {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower-triangular factor `L` with `LLᵀ = Σ`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Distribution of the latent `β` before projection.
#[derive(Debug, Clone)]
pub enum BaseDistribution {
    /// Independent Laplace `DE(0, λ_i)`, density `(2λ_i)⁻¹ exp(−|x|/λ_i)`.
    IndependentDe { lambda: Vec<f64> },
    Gaussian(GaussianBase),
    /// Independent `Cauchy(0, scale_i)`.
    IndependentCauchy { scale: Vec<f64> },
}

fn ensure_positive(values: &[f64], what: &str) -> Result<()> {
    ensure_finite(values, what)?;
    if let Some(i) = values.iter().position(|&v| v <= 0.0) {
        return Err(Error::Config(format!("{what}[{i}] must be positive")));
    }
    Ok(())
}

impl BaseDistribution {
    pub fn independent_de(lambda: Vec<f64>) -> Result<Self> {
        ensure_positive(&lambda, "lambda")?;
        Ok(Self::IndependentDe { lambda })
    }

    pub fn iid_de(p: usize, lambda: f64) -> Result<Self> {
        Self::independent_de(vec![lambda; p])
    }

    /// Fails with a configuration error unless `cov` is symmetric positive definite.
    pub fn gaussian(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&mean, "mean")?;
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::Input(format!(
                "covariance is {}x{} but mean has length {p}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        ensure_finite(cov.as_slice(), "cov")?;
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-10 * cov.amax().max(1.0) {
            return Err(Error::Config("covariance is not symmetric".into()));
        }
        let chol = Cholesky::new(cov).ok_or_else(|| Error::Config("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self::Gaussian(GaussianBase { mean: DVector::from_vec(mean), chol, log_det }))
    }

    pub fn independent_cauchy(scale: Vec<f64>) -> Result<Self> {
        ensure_positive(&scale, "scale")?;
        Ok(Self::IndependentCauchy { scale })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::IndependentDe { lambda } => lambda.len(),
            Self::Gaussian(g) => g.mean.len(),
            Self::IndependentCauchy { scale } => scale.len(),
        }
    }

    fn check_dim(&self, beta: &[f64]) -> Result<()> {
        ensure_finite(beta, "beta")?;
        if beta.len() != self.dim() {
            return Err(Error::Input(format!("beta has length {} but the base has dimension {}", beta.len(), self.dim())));
        }
        Ok(())
    }

    pub fn log_density(&self, beta: &[f64]) -> Result<f64> {
        self.check_dim(beta)?;
        Ok(match self {
            Self::IndependentDe { lambda } => beta
                .iter()
                .zip(lambda)
                .map(|(b, l)| -(2.0 * l).ln() - b.abs() / l)
                .sum(),
            Self::Gaussian(g) => {
                let diff = DVector::from_column_slice(beta) - &g.mean;
                let z = g.chol.l_dirty().solve_lower_triangular(&diff).expect("factor is non-singular");
                -0.5 * (beta.len() as f64 * LN_2PI + g.log_det + z.norm_squared())
            }
            Self::IndependentCauchy { scale } => beta
                .iter()
                .zip(scale)
                .map(|(b, s)| -(std::f64::consts::PI * s).ln() - (b / s).powi(2).ln_1p())
                .sum(),
        })
    }

    /// Writes `∇ log π(β)` into `out`; the Laplace kink at zero gets gradient zero.
    pub fn grad_log_density(&self, beta: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(beta)?;
        match self {
            Self::IndependentDe { lambda } => {
                for ((o, b), l) in out.iter_mut().zip(beta).zip(lambda) {
                    *o = if *b > 0.0 {
                        -1.0 / l
                    } else if *b < 0.0 {
                        1.0 / l
                    } else {
                        0.0
                    };
                }
            }
            Self::Gaussian(g) => {
                let diff = DVector::from_column_slice(beta) - &g.mean;
                let prec_diff = g.chol.solve(&diff);
                for (o, v) in out.iter_mut().zip(prec_diff.iter()) {
                    *o = -v;
                }
            }
            Self::IndependentCauchy { scale } => {
                for ((o, b), s) in out.iter_mut().zip(beta).zip(scale) {
                    *o = -2.0 * b / (s * s + b * b);
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::IndependentDe { lambda } => lambda
                .iter()
                .map(|l| {
                    let e: f64 = Exp::new(1.0 / l).expect("positive rate").sample(rng);
                    if rng.random::<bool>() {
                        e
                    } else {
                        -e
                    }
                })
                .collect(),
            Self::Gaussian(g) => {
                let z = DVector::from_fn(g.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                (&g.mean + g.chol.l_dirty().lower_triangle() * z).iter().copied().collect()
            }
            Self::IndependentCauchy { scale } => scale
                .iter()
                .map(|s| Cauchy::new(0.0, *s).expect("positive scale").sample(rng))
                .collect(),
        }
    }
}

/// `log π(β)` under `base`.
pub fn log_prior_density(beta: &[f64], base: &BaseDistribution) -> Result<f64> {
    base.log_density(beta)
}

/// Prior on the l1-ball radius, or on the non-zero fraction `w` for the
/// quantile-dependent radius `r = Σ(|β_i| − μ̃)₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusPrior {
    /// Density `α⁻¹ exp(−r/α)`.
    Exponential { alpha: f64 },
    /// Density `2 / (π s (1 + (r/s)²))` on `r > 0`.
    HalfCauchy { scale: f64 },
    /// `w ∼ Beta(a_w, b_w)`; `μ̃` is the `(1−w)`-quantile of `|β|`.
    QuantileDependent { a_w: f64, b_w: f64 },
}

/// Radius prior density and its gradient on the sampler's unconstrained scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconstrainedRadius {
    /// `r` or `w`, depending on the prior.
    pub value: f64,
    /// Log density of `u`, including the log-Jacobian of `u ↦ value`.
    pub log_density: f64,
    pub grad: f64,
}

impl RadiusPrior {
    pub fn half_cauchy_default() -> Self {
        Self::HalfCauchy { scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { alpha } => alpha > 0.0 && alpha.is_finite(),
            Self::HalfCauchy { scale } => scale > 0.0 && scale.is_finite(),
            Self::QuantileDependent { a_w, b_w } => a_w > 0.0 && b_w > 0.0 && a_w.is_finite() && b_w.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("radius prior parameters must be positive: {self:?}")))
        }
    }

    pub fn is_quantile_dependent(&self) -> bool {
        matches!(self, Self::QuantileDependent { .. })
    }

    /// Log density of `r` (or `w` for the quantile-dependent prior).
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { alpha } if x >= 0.0 => -alpha.ln() - x / alpha,
            Self::HalfCauchy { scale } if x >= 0.0 => {
                (2.0 / std::f64::consts::PI).ln() - scale.ln() - (x / scale).powi(2).ln_1p()
            }
            Self::QuantileDependent { a_w, b_w } if x > 0.0 && x < 1.0 => {
                (a_w - 1.0) * x.ln() + (b_w - 1.0) * (-x).ln_1p() - ln_beta(a_w, b_w)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Maps `r` to `log r`, or `w` to `logit w`.
    pub fn to_unconstrained(&self, x: f64) -> f64 {
        match self {
            Self::QuantileDependent { .. } => x.ln() - (-x).ln_1p(),
            _ => x.ln(),
        }
    }

    pub fn unconstrained(&self, u: f64) -> UnconstrainedRadius {
        match *self {
            Self::Exponential { alpha } => {
                let r = u.exp();
                UnconstrainedRadius { value: r, log_density: -alpha.ln() - r / alpha + u, grad: 1.0 - r / alpha }
            }
            Self::HalfCauchy { scale } => {
                let r = u.exp();
                let z2 = (r / scale).powi(2);
                UnconstrainedRadius {
                    value: r,
                    log_density: (2.0 / std::f64::consts::PI).ln() - scale.ln() - z2.ln_1p() + u,
                    grad: 1.0 - 2.0 * z2 / (1.0 + z2),
                }
            }
            Self::QuantileDependent { a_w, b_w } => {
                let w = 1.0 / (1.0 + (-u).exp());
                // log w and log(1 − w) from the softplus form, stable for large |u|
                let ln_w = -softplus(-u);
                let ln_1mw = -softplus(u);
                UnconstrainedRadius {
                    value: w,
                    log_density: a_w * ln_w + b_w * ln_1mw - ln_beta(a_w, b_w),
                    grad: a_w * (1.0 - w) - b_w * w,
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { alpha } => Exp::new(1.0 / alpha).expect("positive rate").sample(rng),
            Self::HalfCauchy { scale } => Cauchy::new(0.0, scale).expect("positive scale").sample(rng).abs(),
            Self::QuantileDependent { a_w, b_w } => Beta::new(a_w, b_w).expect("positive shapes").sample(rng),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Hyperparameters of the `(λ, α)` schedule `λ = b1·p^b2/‖X‖`, `α = p^b3/‖X‖`,
/// where `‖X‖` is the largest column norm of the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryHyperparams {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub x_col_norm: f64,
}

/// Output of [`theory_lambda_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryScale {
    pub lambda: f64,
    pub alpha: f64,
    /// `(λ + α)/(λα)`.
    pub lambda_star: f64,
}

pub fn theory_lambda_alpha(p: usize, hp: &TheoryHyperparams) -> Result<TheoryScale> {
    if p == 0 {
        return Err(Error::Domain("p must be at least 1".into()));
    }
    if !(hp.b1 > 0.0) {
        return Err(Error::Domain(format!("b1 must be positive, got {}", hp.b1)));
    }
    if !(hp.b2 > hp.b3) {
        return Err(Error::Domain(format!("b2 must exceed b3, got b2 = {}, b3 = {}", hp.b2, hp.b3)));
    }
    if !(hp.b3 <= 1.0) {
        return Err(Error::Domain(format!("b3 must be at most 1, got {}", hp.b3)));
    }
    if !(hp.x_col_norm > 0.0 && hp.x_col_norm.is_finite()) {
        return Err(Error::Domain(format!("column norm must be positive, got {}", hp.x_col_norm)));
    }
    let p = p as f64;
    let lambda = hp.b1 * p.powf(hp.b2) / hp.x_col_norm;
    let alpha = p.powf(hp.b3) / hp.x_col_norm;
    Ok(TheoryScale { lambda, alpha, lambda_star: (lambda + alpha) / (lambda * alpha) })
}

fn check_j(j: usize, p: usize) -> Result<()> {
    if j == 0 || j > p {
        return Err(Error::Domain(format!("cardinality {j} outside 1..={p}")));
    }
    Ok(())
}

/// `log pr(|C| = j | r)` under iid `DE(0, λ)`: a Poisson`(r/λ)` law on `j − 1`
/// with the tail folded into `j = p`.
pub fn ln_cardinality_pmf(j: usize, p: usize, r: f64, lambda: f64) -> Result<f64> {
    check_j(j, p)?;
    ensure_radius(r)?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let m = r / lambda;
    if j < p {
        let k = (j - 1) as f64;
        Ok(k * m.ln() - ln_gamma(k + 1.0) - m)
    } else if p == 1 {
        Ok(0.0)
    } else {
        // pr(Poisson(m) ≥ p − 1) is the regularized lower incomplete gamma P(p − 1, m)
        Ok(gamma_lr((p - 1) as f64, m).ln())
    }
}

pub fn cardinality_pmf(j: usize, p: usize, r: f64, lambda: f64) -> Result<f64> {
    ln_cardinality_pmf(j, p, r, lambda).map(f64::exp)
}

/// `log pr(|C| = j)` after integrating `r ∼ Exp(α)` out.
pub fn ln_marginal_cardinality_pmf(j: usize, p: usize, lambda: f64, alpha: f64) -> Result<f64> {
    check_j(j, p)?;
    if !(lambda > 0.0 && alpha > 0.0) {
        return Err(Error::Domain("lambda and alpha must be positive".into()));
    }
    let rho = lambda / alpha;
    let l1p = rho.ln_1p();
    if j < p {
        Ok(rho.ln() - j as f64 * l1p)
    } else {
        Ok(-((p - 1) as f64) * l1p)
    }
}

pub fn marginal_cardinality_pmf(j: usize, p: usize, lambda: f64, alpha: f64) -> Result<f64> {
    ln_marginal_cardinality_pmf(j, p, lambda, alpha).map(f64::exp)
}

/// Log kernel of `θ` under iid `DE(0, λ)` projected onto the radius-`r` ball.
///
/// On the boundary this is `(2λ)^{−|C|} / binom(p, |C|) · λ e^{−r/λ}`; strictly
/// inside, the plain product Laplace density.
pub fn de_boundary_log_kernel(theta: &[f64], r: f64, lambda: f64) -> Result<f64> {
    ensure_finite(theta, "theta")?;
    ensure_radius(r)?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let norm: f64 = theta.iter().map(|t| t.abs()).sum();
    let tol = 1e-9 * r;
    if norm > r + tol {
        return Err(Error::Domain(format!("‖theta‖₁ = {norm} exceeds r = {r}")));
    }
    let p = theta.len();
    if norm >= r - tol {
        let c = theta.iter().filter(|&&t| t != 0.0).count();
        Ok(-(c as f64) * (2.0 * lambda).ln() - ln_binomial(p as u64, c as u64) + lambda.ln() - r / lambda)
    } else {
        Ok(theta.iter().map(|t| -(2.0 * lambda).ln() - t.abs() / lambda).sum())
    }
}

/// `pr(θ_i = 0) = 1 − exp(−(μ/c)/λ_i)`.
pub fn zero_probability_adaptive(mu_over_c: f64, lambda_i: f64) -> Result<f64> {
    if !mu_over_c.is_finite() || mu_over_c < 0.0 {
        return Err(Error::Domain(format!("threshold must be finite and non-negative, got {mu_over_c}")));
    }
    if !(lambda_i > 0.0 && lambda_i.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda_i}")));
    }
    Ok(-(-mu_over_c / lambda_i).exp_m1())
}

/// Density of a non-zero `θ_i` given the threshold: `(2λ)⁻¹ exp(−(|θ| + μ/c)/λ)`.
pub fn adaptive_nonzero_density(theta: f64, mu_over_c: f64, lambda_i: f64) -> f64 {
    (-(theta.abs() + mu_over_c) / lambda_i).exp() / (2.0 * lambda_i)
}

/// `(μ̃, r)` with `μ̃` the order statistic of `|β|` at position `⌊p(1−w)⌋`
/// (at least the minimum) and `r = Σ(|β_i| − μ̃)₊`.
pub fn radius_from_quantile(beta: &[f64], w: f64) -> Result<(f64, f64)> {
    ensure_finite(beta, "beta")?;
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain(format!("w must lie in (0, 1), got {w}")));
    }
    let mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    let mu_tilde = lower_order_statistic(&mags, 1.0 - w)?;
    let r = mags.iter().map(|m| (m - mu_tilde).max(0.0)).sum();
    Ok((mu_tilde, r))
}

/// A univariate density with a sampler, used for the spike-and-slab components.
pub trait UnivariateDensity: Send + Sync {
    fn ln_pdf(&self, x: f64) -> f64;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct LaplaceDensity {
    pub scale: f64,
}

impl UnivariateDensity for LaplaceDensity {
    fn ln_pdf(&self, x: f64) -> f64 {
        -(2.0 * self.scale).ln() - x.abs() / self.scale
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let e: f64 = Exp::new(1.0 / self.scale).expect("positive rate").sample(rng);
        if rng.random::<bool>() {
            e
        } else {
            -e
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormalDensity {
    pub mean: f64,
    pub sd: f64,
}

impl UnivariateDensity for NormalDensity {
    fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * (LN_2PI + z * z) - self.sd.ln()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        Normal::new(self.mean, self.sd).expect("positive sd").sample(rng)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformDensity {
    pub lo: f64,
    pub hi: f64,
}

impl UnivariateDensity for UniformDensity {
    fn ln_pdf(&self, x: f64) -> f64 {
        if x >= self.lo && x <= self.hi {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random_range(self.lo..=self.hi)
    }
}

fn midpoint_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Spike-and-slab base law whose soft-thresholding at `μ̃` has
/// `pr(θ_i = 0) = 1 − w` and non-zero part distributed as the slab.
pub struct SpikeSlabBase {
    w: f64,
    mu_tilde: f64,
    slab: Box<dyn UnivariateDensity>,
    interior: Box<dyn UnivariateDensity>,
}

impl std::fmt::Debug for SpikeSlabBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpikeSlabBase").field("w", &self.w).field("mu_tilde", &self.mu_tilde).finish()
    }
}

impl SpikeSlabBase {
    /// Checks by quadrature that `interior` integrates to one on `[−μ̃, μ̃]` and
    /// that `slab` integrates to one on the real line.
    pub fn new(
        w: f64,
        mu_tilde: f64,
        slab: Box<dyn UnivariateDensity>,
        interior: Box<dyn UnivariateDensity>,
    ) -> Result<Self> {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::Domain(format!("w must lie in (0, 1], got {w}")));
        }
        if !(mu_tilde > 0.0 && mu_tilde.is_finite()) {
            return Err(Error::Domain(format!("mu_tilde must be positive, got {mu_tilde}")));
        }
        let inner = midpoint_integral(|x| interior.ln_pdf(x).exp(), -mu_tilde, mu_tilde, 20_000);
        if (inner - 1.0).abs() > 1e-3 {
            return Err(Error::Config(format!("interior density integrates to {inner} on [-mu, mu]")));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        let outer = midpoint_integral(
            |u| {
                let c = u.cos();
                slab.ln_pdf(u.tan()).exp() / (c * c)
            },
            -half_pi,
            half_pi,
            200_000,
        );
        if (outer - 1.0).abs() > 1e-3 {
            return Err(Error::Config(format!("slab density integrates to {outer}")));
        }
        Ok(Self { w, mu_tilde, slab, interior })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x.abs() <= self.mu_tilde {
            (1.0 - self.w).ln() + self.interior.ln_pdf(x)
        } else {
            self.w.ln() + self.slab.ln_pdf(x.signum() * (x.abs() - self.mu_tilde))
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        if rng.random::<f64>() < self.w {
            let z = self.slab.sample(rng);
            let sgn = if z < 0.0 { -1.0 } else { 1.0 };
            sgn * (z.abs() + self.mu_tilde)
        } else {
            self.interior.sample(rng)
        }
    }
}

/// Log density of the spike-and-slab base at `x`; see [`SpikeSlabBase`].
pub fn spike_slab_base_log_density(
    x: f64,
    w: f64,
    mu_tilde: f64,
    slab: Box<dyn UnivariateDensity>,
    interior: Box<dyn UnivariateDensity>,
) -> Result<f64> {
    Ok(SpikeSlabBase::new(w, mu_tilde, slab, interior)?.log_density(x))
}

/// How the radius is chosen in a prior simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusDraw {
    Fixed(f64),
    Prior(RadiusPrior),
}

/// Monte Carlo draws are split into chunks of this size, each with its own
/// RNG stream, so results do not depend on the execution mode.
pub const SIMULATION_CHUNK: usize = 4096;

/// Per-chunk RNG: stream `chunk` of the ChaCha generator seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Draws `(β, r)` from the prior, projects, and counts `|C|`. Entry `k` of the
/// result is the number of draws with `k` non-zero coordinates.
pub fn simulate_cardinality(
    base: &BaseDistribution,
    radius: &RadiusDraw,
    n_draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<u64>> {
    let p = base.dim();
    match radius {
        RadiusDraw::Fixed(r) => ensure_radius(*r)?,
        RadiusDraw::Prior(rp) => rp.validate()?,
    }
    let n_chunks = n_draws.div_ceil(SIMULATION_CHUNK);
    let run_chunk = |chunk: usize| -> Result<Vec<u64>> {
        let mut rng = chunk_rng(seed, chunk as u64);
        let mut counts = vec![0u64; p + 1];
        let len = SIMULATION_CHUNK.min(n_draws - chunk * SIMULATION_CHUNK);
        for _ in 0..len {
            let beta = base.sample(&mut rng);
            let r = match radius {
                RadiusDraw::Fixed(r) => *r,
                RadiusDraw::Prior(RadiusPrior::QuantileDependent { a_w, b_w }) => {
                    let w: f64 = Beta::new(*a_w, *b_w).expect("validated").sample(&mut rng);
                    let w = w.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                    let (_, r) = radius_from_quantile(&beta, w)?;
                    if r <= 0.0 {
                        counts[0] += 1;
                        continue;
                    }
                    r
                }
                RadiusDraw::Prior(rp) => rp.sample(&mut rng).max(f64::MIN_POSITIVE),
            };
            counts[project_l1_ball(&beta, r)?.cardinality()] += 1;
        }
        Ok(counts)
    };
    map_reduce(
        n_chunks,
        exec,
        run_chunk,
        Ok(vec![0u64; p + 1]),
        |acc, next| {
            let mut acc = acc?;
            for (a, b) in acc.iter_mut().zip(next?) {
                *a += b;
            }
            Ok(acc)
        },
    )
}

/// Whether `‖θ‖₁` sits on the radius-`r` sphere within the interior tolerance.
pub fn on_boundary(theta: &[f64], r: f64) -> bool {
    let norm: f64 = theta.iter().map(|t| t.abs()).sum();
    (norm - r).abs() <= r * INTERIOR_RTOL.max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cardinality_pmf_values() {
        assert_abs_diff_eq!(cardinality_pmf(1, 5, 0.7, 1.3).unwrap(), (-0.7f64 / 1.3).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(cardinality_pmf(2, 3, 1.0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(cardinality_pmf(0, 3, 1.0, 1.0).is_err());
        assert!(cardinality_pmf(4, 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn cardinality_pmf_sums_to_one() {
        for p in [1usize, 2, 5, 8, 40, 300] {
            for (r, l) in [(0.1, 1.0), (2.0, 1.0), (30.0, 0.5), (5.0, 5.0)] {
                let s: f64 = (1..=p).map(|j| cardinality_pmf(j, p, r, l).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-12, "p={p} r={r} l={l} sum={s}");
            }
        }
    }

    #[test]
    fn marginal_pmf_values() {
        assert_abs_diff_eq!(marginal_cardinality_pmf(1, 2, 3.0, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(marginal_cardinality_pmf(2, 2, 3.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        for j in 1..6 {
            assert_abs_diff_eq!(marginal_cardinality_pmf(j, 6, 2.0, 2.0).unwrap(), 0.5f64.powi(j as i32), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(marginal_cardinality_pmf(6, 6, 2.0, 2.0).unwrap(), 0.5f64.powi(5), epsilon = 1e-15);
    }

    #[test]
    fn boundary_kernel_values() {
        let k = de_boundary_log_kernel(&[2.0], 2.0, 1.5).unwrap();
        assert_abs_diff_eq!(k, (-2.0f64 / 1.5).exp().ln() - 2f64.ln(), epsilon = 1e-14);
        let k = de_boundary_log_kernel(&[0.4, 0.0, -0.6], 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(k, (0.25f64 / 3.0 * (-1.0f64).exp()).ln(), epsilon = 1e-14);
        assert!(de_boundary_log_kernel(&[1.0, 1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn adaptive_zero_probability() {
        assert_eq!(zero_probability_adaptive(0.0, 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(zero_probability_adaptive(2.0, 2.0).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert!(zero_probability_adaptive(-0.1, 1.0).is_err());
    }

    #[test]
    fn quantile_radius_example() {
        let (mu, r) = radius_from_quantile(&[4.0, -3.0, 2.0, 1.0], 0.5).unwrap();
        assert_eq!(mu, 2.0);
        assert_eq!(r, 3.0);
        let proj = project_l1_ball(&[4.0, -3.0, 2.0, 1.0], r).unwrap();
        assert_eq!(proj.theta.iter().filter(|&&t| t == 0.0).count(), 2);
        assert!(radius_from_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn theory_schedule() {
        let hp = TheoryHyperparams { b1: 1.0, b2: 1.0, b3: 0.0, x_col_norm: 1.0 };
        let s = theory_lambda_alpha(10, &hp).unwrap();
        assert_abs_diff_eq!(s.lambda, 10.0);
        assert_abs_diff_eq!(s.alpha, 1.0);
        assert_abs_diff_eq!(s.lambda_star, 1.1, epsilon = 1e-15);
        let bad = TheoryHyperparams { b3: 1.0, ..hp };
        assert!(matches!(theory_lambda_alpha(10, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn base_log_densities() {
        let de = BaseDistribution::iid_de(3, 1.0).unwrap();
        assert_abs_diff_eq!(de.log_density(&[0.0; 3]).unwrap(), 3.0 * 0.5f64.ln(), epsilon = 1e-15);
        let g = BaseDistribution::gaussian(vec![0.0; 4], DMatrix::identity(4, 4)).unwrap();
        assert_abs_diff_eq!(g.log_density(&[0.0; 4]).unwrap(), -2.0 * LN_2PI, epsilon = 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(BaseDistribution::gaussian(vec![0.0; 2], bad), Err(Error::Config(_))));
        assert!(matches!(BaseDistribution::iid_de(2, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn unconstrained_radius_gradients() {
        for prior in [
            RadiusPrior::Exponential { alpha: 2.0 },
            RadiusPrior::HalfCauchy { scale: 1.0 },
            RadiusPrior::QuantileDependent { a_w: 2.0, b_w: 5.0 },
        ] {
            for u in [-2.0, -0.3, 0.0, 0.8, 3.0] {
                let h = 1e-6;
                let fd = (prior.unconstrained(u + h).log_density - prior.unconstrained(u - h).log_density) / (2.0 * h);
                assert!((fd - prior.unconstrained(u).grad).abs() < 1e-6, "{prior:?} u={u}");
                let v = prior.unconstrained(u).value;
                assert_abs_diff_eq!(prior.to_unconstrained(v), u, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spike_slab_rejects_improper_interior() {
        let bad = SpikeSlabBase::new(
            0.5,
            1.0,
            Box::new(LaplaceDensity { scale: 1.0 }),
            Box::new(UniformDensity { lo: -2.0, hi: 2.0 }),
        );
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn simulation_is_mode_independent() {
        let base = BaseDistribution::iid_de(4, 1.0).unwrap();
        let a = simulate_cardinality(&base, &RadiusDraw::Fixed(1.5), 10_000, 3, Execution::Sequential).unwrap();
        let b = simulate_cardinality(&base, &RadiusDraw::Fixed(1.5), 10_000, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<u64>(), 10_000);
    }
}
