use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use super::{check_position, count_nonzero, NoisePrior, RadiusModel, VectorLayer};
use crate::error::{ensure_finite, Error, Result};
use crate::priors::BaseDistribution;
use crate::sampler::{Draw, Model, Target};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Design, response and noise prior for `y ∼ N(Xθ, σ²I)`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub noise: NoisePrior,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, noise: NoisePrior) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Input(format!("X has {} rows but y has {} entries", x.nrows(), y.len())));
        }
        ensure_finite(x.as_slice(), "X")?;
        ensure_finite(y.as_slice(), "y")?;
        noise.validate()?;
        Ok(Self { x, y, noise })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Gaussian log-likelihood with its gradient in `θ` and in `log σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionLikelihood {
    pub log_lik: f64,
    pub grad_theta: Vec<f64>,
    pub grad_log_sigma2: f64,
}

pub fn regression_log_lik_grad(theta: &[f64], sigma2: f64, data: &RegressionData) -> Result<RegressionLikelihood> {
    if theta.len() != data.p() {
        return Err(Error::Input(format!("theta has length {} but X has {} columns", theta.len(), data.p())));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mut resid = data.y.clone();
    for (j, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            resid.axpy(-t, &data.x.column(j), 1.0);
        }
    }
    let n = data.n() as f64;
    let rss = resid.norm_squared();
    let log_lik = -0.5 * n * (LN_2PI + sigma2.ln()) - 0.5 * rss / sigma2;
    let grad_theta = (data.x.tr_mul(&resid) / sigma2).iter().copied().collect();
    let grad_log_sigma2 = -0.5 * n + 0.5 * rss / sigma2;
    Ok(RegressionLikelihood { log_lik, grad_theta, grad_log_sigma2 })
}

/// Lasso fits by warm-started coordinate descent on a geometric grid of
/// `n_grid` penalties from `max_j |x_jᵀy|` down to 1% of it.
fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, n_grid: usize) -> Vec<Vec<f64>> {
    let p = x.ncols();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    let top = (0..p).map(|j| x.column(j).dot(y).abs()).fold(0.0, f64::max);
    let mut theta = vec![0.0; p];
    let mut resid = y.clone();
    let mut path = Vec::with_capacity(n_grid);
    for k in 0..n_grid {
        let penalty = top * 0.01f64.powf(k as f64 / (n_grid - 1).max(1) as f64);
        for _ in 0..500 {
            let mut moved: f64 = 0.0;
            for j in 0..p {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let z = x.column(j).dot(&resid) + col_sq[j] * theta[j];
                let next = z.signum() * (z.abs() - penalty).max(0.0) / col_sq[j];
                let step = next - theta[j];
                if step != 0.0 {
                    resid.axpy(-step, &x.column(j), 1.0);
                    theta[j] = next;
                    moved = moved.max(step.abs() * col_sq[j].sqrt());
                }
            }
            if moved < 1e-8 * (1.0 + top) {
                break;
            }
        }
        path.push(theta.clone());
    }
    path
}

fn support_of(fit: &[f64]) -> Vec<usize> {
    (0..fit.len()).filter(|&j| fit[j] != 0.0).collect()
}

/// Least squares on `support` as a full-length coefficient vector, if the
/// support is non-empty with at most `n/2` columns.
fn least_squares_on(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Option<Vec<f64>> {
    if support.is_empty() || 2 * support.len() > x.nrows() {
        return None;
    }
    let sub = x.select_columns(support);
    let coef = sub.svd(true, true).solve(y, 1e-12).ok()?;
    let mut out = vec![0.0; x.ncols()];
    for (&j, &c) in support.iter().zip(coef.iter()) {
        out[j] = c;
    }
    Some(out)
}

/// Sparse linear regression: `θ = P(β, r)`, `β ∼ base`, `r` fixed or random,
/// `σ²` known or inverse-gamma.
///
/// Position layout: `[β (p), radius (0 or 1), log σ² (0 or 1)]`.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    data: RegressionData,
    base: BaseDistribution,
    radius: RadiusModel,
}

impl RegressionModel {
    pub fn new(data: RegressionData, base: BaseDistribution, radius: RadiusModel) -> Result<Self> {
        if base.dim() != data.p() {
            return Err(Error::Config(format!("base has dimension {} but X has {} columns", base.dim(), data.p())));
        }
        radius.validate()?;
        Ok(Self { data, base, radius })
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    pub fn base(&self) -> &BaseDistribution {
        &self.base
    }

    pub fn radius(&self) -> &RadiusModel {
        &self.radius
    }

    fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64], &'q [f64]) {
        let p = self.data.p();
        let (beta, rest) = q.split_at(p);
        let (u, s) = rest.split_at(self.radius.n_params());
        (beta, u, s)
    }
}

struct RegressionTarget<'a> {
    model: &'a RegressionModel,
    base_grad: Vec<f64>,
}

impl Target for RegressionTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u, s) = m.split(q);
        let p = beta.len();
        let layer = VectorLayer::new(beta, &m.radius, u)?;
        let (sigma2, lp_noise, g_noise) = m.data.noise.eval(s);
        let lik = regression_log_lik_grad(&layer.point.theta, sigma2, &m.data)?;
        let (g_beta, g_u) = layer.vjp(beta, &lik.grad_theta);
        m.base.grad_log_density(beta, &mut self.base_grad)?;
        for j in 0..p {
            grad[j] = g_beta[j] + self.base_grad[j];
        }
        if !u.is_empty() {
            grad[p] = g_u + layer.radius.grad;
        }
        if !s.is_empty() {
            grad[p + u.len()] = lik.grad_log_sigma2 + g_noise;
        }
        Ok(lik.log_lik + m.base.log_density(beta)? + layer.radius.log_density + lp_noise)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u, s) = m.split(q);
        let layer = VectorLayer::new(beta, &m.radius, u)?;
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), count_nonzero(&layer.point.theta) as f64);
        extras.insert("sigma2".into(), m.data.noise.eval(s).0);
        if let Some(mu) = layer.mu_tilde {
            extras.insert("w".into(), layer.radius.value);
            extras.insert("mu_tilde".into(), mu);
        }
        Ok(Draw { beta: beta.to_vec(), theta: layer.point.theta, r: layer.r, extras })
    }
}

impl Model for RegressionModel {
    fn name(&self) -> &str {
        "regression"
    }

    fn dim(&self) -> usize {
        self.data.p() + self.radius.n_params() + self.data.noise.n_params()
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        Ok(Box::new(RegressionTarget { model: self, base_grad: vec![0.0; self.data.p()] }))
    }

    /// The highest-density candidate along a lasso path and its least-squares
    /// refits. Each fit `θ̂` maps
    /// to active `β` one unit past the threshold, inactive `β` uniform inside
    /// it, `r = ‖θ̂‖₁` (or `w = ½`) and `σ²` the residual variance with the
    /// support size as degrees of freedom.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let (n, p) = (self.data.n(), self.data.p());
        let jitter: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
        let candidate = |fit: &[f64]| {
            let mut q: Vec<f64> =
                fit.iter().zip(&jitter).map(|(&t, &u)| if t == 0.0 { u } else { t + t.signum() }).collect();
            let l1: f64 = fit.iter().map(|t| t.abs()).sum();
            let start = if self.radius.is_quantile_dependent() {
                0.5
            } else if l1 > 0.0 {
                l1
            } else {
                jitter.iter().map(|b| (b.abs() - 0.25).max(0.0)).sum::<f64>().max(1e-3)
            };
            q.extend(self.radius.init(start));
            if self.data.noise.n_params() == 1 {
                let df = n.saturating_sub(count_nonzero(fit)).max(1) as f64;
                let mut resid = self.data.y.clone();
                for (j, &t) in fit.iter().enumerate() {
                    if t != 0.0 {
                        resid.axpy(-t, &self.data.x.column(j), 1.0);
                    }
                }
                q.push((resid.norm_squared() / df).max(1e-6).ln());
            }
            q
        };
        let mut best = (f64::NEG_INFINITY, candidate(&vec![0.0; p]));
        if let Ok(mut target) = self.make_target() {
            let mut grad = vec![0.0; self.dim()];
            let path = lasso_path(&self.data.x, &self.data.y, 30);
            let (x, y) = (&self.data.x, &self.data.y);
            let refits: Vec<Vec<f64>> = path.iter().filter_map(|fit| least_squares_on(x, y, &support_of(fit))).collect();
            for fit in path.iter().chain(&refits) {
                let q = candidate(fit);
                if let Ok(lp) = target.log_density_grad(&q, &mut grad) {
                    if lp > best.0 {
                        best = (lp, q);
                    }
                }
            }
        }
        best.1
    }
}
