use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::{check_position, count_nonzero, InverseGamma, RadiusModel, VectorLayer};
use crate::error::{ensure_finite, ensure_radius, Error, Result};
use crate::priors::BaseDistribution;
use crate::projection::project_l1_ball;
use crate::sampler::{Draw, Model, Target};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Observations and component priors for a mixture with at most `k1` components.
#[derive(Debug, Clone)]
pub struct MixtureData {
    pub y: Vec<f64>,
    pub k1: usize,
    /// Prior `μ_k ∼ N(0, mu_sd²)`.
    pub mu_sd: f64,
    pub sigma2_prior: InverseGamma,
}

impl MixtureData {
    pub fn new(y: Vec<f64>, k1: usize, mu_sd: f64, sigma2_prior: InverseGamma) -> Result<Self> {
        ensure_finite(&y, "y")?;
        if k1 < 2 {
            return Err(Error::Input(format!("k1 must be at least 2, got {k1}")));
        }
        if !(mu_sd > 0.0) {
            return Err(Error::Config(format!("mu_sd must be positive, got {mu_sd}")));
        }
        sigma2_prior.validate()?;
        Ok(Self { y, k1, mu_sd, sigma2_prior })
    }
}

fn simplex_from_projection(w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("all projected weights are zero".into()));
    }
    Ok(w.iter().map(|x| x.abs() / total).collect())
}

/// `θ_k = |w_k| / Σ|w_i|` with `w = P(β, r)`; zero exactly where `w_k` is.
pub fn mixture_weights_from_ball(beta: &[f64], r: f64) -> Result<Vec<f64>> {
    ensure_radius(r)?;
    if beta.len() < 2 {
        return Err(Error::Input(format!("need at least 2 weights, got {}", beta.len())));
    }
    simplex_from_projection(&project_l1_ball(beta, r)?.theta)
}

/// Per-observation `log φ(y_j | μ_k, σ²_k)` over the active components.
fn component_log_densities(y: f64, active: &[usize], mus: &[f64], sigma2s: &[f64], out: &mut [f64]) {
    for (o, &k) in out.iter_mut().zip(active) {
        let d = y - mus[k];
        *o = -0.5 * (LN_2PI + sigma2s[k].ln() + d * d / sigma2s[k]);
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `Σ_j log Σ_k θ_k φ(y_j | μ_k, σ²_k)`, summing only components with `θ_k > 0`.
pub fn mixture_log_lik(y: &[f64], theta: &[f64], mus: &[f64], sigma2s: &[f64]) -> Result<f64> {
    if theta.len() != mus.len() || theta.len() != sigma2s.len() {
        return Err(Error::Input("theta, mus and sigma2s must have equal length".into()));
    }
    if let Some(k) = sigma2s.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Domain(format!("sigma2s[{k}] must be positive")));
    }
    let active: Vec<usize> = (0..theta.len()).filter(|&k| theta[k] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::Degenerate("no component has positive weight".into()));
    }
    let ln_w: Vec<f64> = active.iter().map(|&k| theta[k].ln()).collect();
    let mut buf = vec![0.0; active.len()];
    let mut total = 0.0;
    for &yj in y {
        component_log_densities(yj, &active, mus, sigma2s, &mut buf);
        for (b, lw) in buf.iter_mut().zip(&ln_w) {
            *b += lw;
        }
        total += log_sum_exp(&buf);
    }
    Ok(total)
}

/// Mixture of finite mixtures through the closure of the simplex:
/// `w = P(β, r)`, `θ = |w|/Σ|w|`, `μ_k ∼ N(0, mu_sd²)`, `σ²_k ∼ Inverse-Gamma`.
///
/// Position layout: `[β (K1), radius (0 or 1), μ (K1), log σ² (K1)]`.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    data: MixtureData,
    base: BaseDistribution,
    radius: RadiusModel,
}

impl MixtureModel {
    pub fn new(data: MixtureData, base: BaseDistribution, radius: RadiusModel) -> Result<Self> {
        radius.require_explicit("the mixture model")?;
        if base.dim() != data.k1 {
            return Err(Error::Config(format!("base has dimension {} but k1 = {}", base.dim(), data.k1)));
        }
        Ok(Self { data, base, radius })
    }

    pub fn data(&self) -> &MixtureData {
        &self.data
    }

    fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64], &'q [f64], &'q [f64]) {
        let k1 = self.data.k1;
        let (beta, rest) = q.split_at(k1);
        let (u, rest) = rest.split_at(self.radius.n_params());
        let (mus, s) = rest.split_at(k1);
        (beta, u, mus, s)
    }
}

struct MixtureTarget<'a> {
    model: &'a MixtureModel,
    base_grad: Vec<f64>,
    buf: Vec<f64>,
}

impl Target for MixtureTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let k1 = m.data.k1;
        let (beta, u, mus, s) = m.split(q);
        let layer = VectorLayer::new(beta, &m.radius, u)?;
        let w = &layer.point.theta;
        let theta = simplex_from_projection(w)?;
        let active: Vec<usize> = (0..k1).filter(|&k| theta[k] > 0.0).collect();
        let sigma2s: Vec<f64> = s.iter().map(|x| x.exp()).collect();
        let ln_w: Vec<f64> = active.iter().map(|&k| theta[k].ln()).collect();

        let mut g_theta = vec![0.0; k1];
        let mut g_mu = vec![0.0; k1];
        let mut g_s = vec![0.0; k1];
        let mut ll = 0.0;
        self.buf.resize(active.len(), 0.0);
        for &yj in &m.data.y {
            component_log_densities(yj, &active, mus, &sigma2s, &mut self.buf);
            let joint: Vec<f64> = self.buf.iter().zip(&ln_w).map(|(a, b)| a + b).collect();
            let lse = log_sum_exp(&joint);
            ll += lse;
            for (a, &k) in active.iter().enumerate() {
                let resp = (joint[a] - lse).exp();
                g_theta[k] += (self.buf[a] - lse).exp();
                let d = yj - mus[k];
                g_mu[k] += resp * d / sigma2s[k];
                g_s[k] += resp * (-0.5 + 0.5 * d * d / sigma2s[k]);
            }
        }

        // θ = |w| / S with S = Σ|w|
        let total: f64 = w.iter().map(|x| x.abs()).sum();
        let mean_g: f64 = active.iter().map(|&k| g_theta[k] * theta[k]).sum();
        let mut g_w = vec![0.0; k1];
        for &k in &active {
            let sign = if w[k] < 0.0 { -1.0 } else { 1.0 };
            g_w[k] = sign * (g_theta[k] - mean_g) / total;
        }
        let (g_beta, g_u) = layer.vjp(beta, &g_w);
        m.base.grad_log_density(beta, &mut self.base_grad)?;
        for k in 0..k1 {
            grad[k] = g_beta[k] + self.base_grad[k];
        }
        let off = k1 + u.len();
        if !u.is_empty() {
            grad[k1] = g_u + layer.radius.grad;
        }
        let var_mu = m.data.mu_sd * m.data.mu_sd;
        let mut lp = ll + m.base.log_density(beta)? + layer.radius.log_density;
        for k in 0..k1 {
            grad[off + k] = g_mu[k] - mus[k] / var_mu;
            let (lp_s, g_prior) = m.data.sigma2_prior.log_density_log_scale(s[k]);
            grad[off + k1 + k] = g_s[k] + g_prior;
            lp += lp_s - 0.5 * mus[k] * mus[k] / var_mu - 0.5 * (LN_2PI + var_mu.ln());
        }
        Ok(lp)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u, mus, s) = m.split(q);
        let layer = VectorLayer::new(beta, &m.radius, u)?;
        let theta = simplex_from_projection(&layer.point.theta)?;
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), count_nonzero(&theta) as f64);
        for k in 0..m.data.k1 {
            extras.insert(format!("mu_{k}"), mus[k]);
            extras.insert(format!("sigma2_{k}"), s[k].exp());
        }
        Ok(Draw { beta: beta.to_vec(), theta, r: layer.r, extras })
    }
}

impl Model for MixtureModel {
    fn name(&self) -> &str {
        "mixture"
    }

    fn dim(&self) -> usize {
        3 * self.data.k1 + self.radius.n_params()
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        Ok(Box::new(MixtureTarget { model: self, base_grad: vec![0.0; self.data.k1], buf: Vec::new() }))
    }

    /// Every component active: `β_k` of equal size with random signs, the
    /// radius at 90% of `‖β‖₁`, means spread over the data quantiles and
    /// variances at a quarter of the data variance.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let k1 = self.data.k1;
        let mut q: Vec<f64> = (0..k1)
            .map(|_| {
                let b = rng.random_range(0.8..1.2);
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            })
            .collect();
        let l1: f64 = q.iter().map(|b| b.abs()).sum();
        q.extend(self.radius.init(0.9 * l1));
        let mut sorted = self.data.y.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        for k in 0..k1 {
            let idx = (((k as f64 + rng.random::<f64>()) / k1 as f64) * n as f64) as usize;
            q.push(sorted[idx.min(n - 1)]);
        }
        let var = crate::stats::variance(&self.data.y).max(1e-6);
        q.extend(std::iter::repeat_n((0.25 * var).ln(), k1));
        q
    }
}
