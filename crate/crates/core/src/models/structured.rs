use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{check_position, count_nonzero, InverseGamma, RadiusModel, VectorLayer};
use crate::error::{ensure_finite, ensure_radius, Error, Result};
use crate::priors::BaseDistribution;
use crate::projection::project_l1_ball;
use crate::sampler::{Draw, Model, Target};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A symmetric observation `A ≈ Σ_k λ_k θ_k θ_kᵀ` (off-diagonal entries
/// only) and the structural connectivity `S` shaping the base covariance.
#[derive(Debug, Clone)]
pub struct StructuredData {
    pub a: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub n_factors: usize,
    /// Ridge `κ` in the base covariance `J − S + κI`.
    pub kappa: f64,
}

impl StructuredData {
    pub fn new(a: DMatrix<f64>, s: DMatrix<f64>, n_factors: usize, kappa: f64) -> Result<Self> {
        let p = a.nrows();
        if p < 2 || a.ncols() != p || s.nrows() != p || s.ncols() != p {
            return Err(Error::Input(format!("A and S must be square of equal size ≥ 2, got {:?} and {:?}", a.shape(), s.shape())));
        }
        ensure_finite(a.as_slice(), "A")?;
        ensure_finite(s.as_slice(), "S")?;
        if n_factors == 0 {
            return Err(Error::Input("need at least one factor".into()));
        }
        if !(kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be non-negative, got {kappa}")));
        }
        Ok(Self { a, s, n_factors, kappa })
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }
}

/// `J − S + κI`, failing with a configuration error unless it is positive definite.
pub fn structured_base_covariance(s: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    let cov = DMatrix::from_element(p, p, 1.0) - s + DMatrix::identity(p, p) * kappa;
    if cov.clone().cholesky().is_none() {
        return Err(Error::Config(format!("J − S + κI is not positive definite for κ = {kappa}")));
    }
    Ok(cov)
}

/// Residual sum over `i < j`, with gradients in `θ` (row per factor) and `λ`.
fn pair_likelihood(data: &StructuredData, theta: &[Vec<f64>], lambda: &[f64], sigma2: f64) -> (f64, Vec<Vec<f64>>, Vec<f64>, f64) {
    let p = data.p();
    let d = theta.len();
    let mut g_theta = vec![vec![0.0; p]; d];
    let mut g_lambda = vec![0.0; d];
    let mut rss = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            let fit: f64 = (0..d).map(|k| lambda[k] * theta[k][i] * theta[k][j]).sum();
            let r = data.a[(i, j)] - fit;
            rss += r * r;
            let w = r / sigma2;
            for k in 0..d {
                g_theta[k][i] += w * lambda[k] * theta[k][j];
                g_theta[k][j] += w * lambda[k] * theta[k][i];
                g_lambda[k] += w * theta[k][i] * theta[k][j];
            }
        }
    }
    let m = (p * (p - 1) / 2) as f64;
    let ll = -0.5 * m * (LN_2PI + sigma2.ln()) - 0.5 * rss / sigma2;
    (ll, g_theta, g_lambda, rss)
}

/// Log-likelihood of `A` given `θ_k = P(β_k, r_k)` and `λ = P(γ, r̃)`;
/// `radii` holds `r_1..r_d` followed by `r̃`.
pub fn structured_sparsity_target(betas: &[f64], gammas: &[f64], radii: &[f64], sigma2: f64, data: &StructuredData) -> Result<f64> {
    let (p, d) = (data.p(), data.n_factors);
    if betas.len() != d * p || gammas.len() != d || radii.len() != d + 1 {
        return Err(Error::Input(format!("expected {} loadings, {d} scales and {} radii", d * p, d + 1)));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let theta = (0..d)
        .map(|k| {
            ensure_radius(radii[k])?;
            Ok(project_l1_ball(&betas[k * p..(k + 1) * p], radii[k])?.theta)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = project_l1_ball(gammas, radii[d])?.theta;
    Ok(pair_likelihood(data, &theta, &lambda, sigma2).0)
}

/// Low-rank factor model with structured sparsity:
/// `θ_k = P(β_k, r_k)`, `β_k ∼ N(0, J − S + κI)`, `λ = P(γ, r̃)`, `γ_k ∼ Exp(1)`.
///
/// Position layout: `[β (d·p), log γ (d), r_k (0 or d), r̃ (0 or 1), log σ²]`.
#[derive(Debug, Clone)]
pub struct StructuredModel {
    data: StructuredData,
    base: BaseDistribution,
    radius: RadiusModel,
    radius_lambda: RadiusModel,
    noise: InverseGamma,
}

impl StructuredModel {
    pub fn new(data: StructuredData, radius: RadiusModel, radius_lambda: RadiusModel, noise: InverseGamma) -> Result<Self> {
        radius.require_explicit("the factor loadings")?;
        radius_lambda.require_explicit("the factor scales")?;
        noise.validate()?;
        let cov = structured_base_covariance(&data.s, data.kappa)?;
        let base = BaseDistribution::gaussian(vec![0.0; data.p()], cov)?;
        Ok(Self { data, base, radius, radius_lambda, noise })
    }

    pub fn data(&self) -> &StructuredData {
        &self.data
    }

    pub fn base(&self) -> &BaseDistribution {
        &self.base
    }

    #[allow(clippy::type_complexity)]
    fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64], &'q [f64], &'q [f64], f64) {
        let (p, d) = (self.data.p(), self.data.n_factors);
        let (beta, rest) = q.split_at(d * p);
        let (v, rest) = rest.split_at(d);
        let (u, rest) = rest.split_at(d * self.radius.n_params());
        let (ul, rest) = rest.split_at(self.radius_lambda.n_params());
        (beta, v, u, ul, rest[0])
    }

    fn layers(&self, beta: &[f64], u: &[f64]) -> Result<Vec<VectorLayer>> {
        let p = self.data.p();
        let k = self.radius.n_params();
        (0..self.data.n_factors)
            .map(|f| VectorLayer::new(&beta[f * p..(f + 1) * p], &self.radius, &u[f * k..(f + 1) * k]))
            .collect()
    }
}

struct StructuredTarget<'a> {
    model: &'a StructuredModel,
    base_grad: Vec<f64>,
}

impl Target for StructuredTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (p, d) = (m.data.p(), m.data.n_factors);
        let (beta, v, u, ul, s) = m.split(q);
        let layers = m.layers(beta, u)?;
        let gamma: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let lam = VectorLayer::new(&gamma, &m.radius_lambda, ul)?;
        let theta: Vec<Vec<f64>> = layers.iter().map(|l| l.point.theta.clone()).collect();
        let sigma2 = s.exp();
        let (ll, g_theta, g_lambda, rss) = pair_likelihood(&m.data, &theta, &lam.point.theta, sigma2);

        let mut lp = ll;
        let k = m.radius.n_params();
        for (f, layer) in layers.iter().enumerate() {
            let b = &beta[f * p..(f + 1) * p];
            let (gb, gu) = layer.vjp(b, &g_theta[f]);
            m.base.grad_log_density(b, &mut self.base_grad)?;
            for j in 0..p {
                grad[f * p + j] = gb[j] + self.base_grad[j];
            }
            if k == 1 {
                grad[d * p + d + f] = gu + layer.radius.grad;
            }
            lp += m.base.log_density(b)? + layer.radius.log_density;
        }
        let (g_gamma, g_ul) = lam.vjp(&gamma, &g_lambda);
        for f in 0..d {
            // γ = e^v with γ ∼ Exp(1): log density −γ + v
            grad[d * p + f] = g_gamma[f] * gamma[f] - gamma[f] + 1.0;
            lp += -gamma[f] + v[f];
        }
        let off = d * p + d + u.len();
        if !ul.is_empty() {
            grad[off] = g_ul + lam.radius.grad;
        }
        lp += lam.radius.log_density;
        let (lp_noise, g_noise) = m.noise.log_density_log_scale(s);
        let n_pairs = (p * (p - 1) / 2) as f64;
        grad[off + ul.len()] = -0.5 * n_pairs + 0.5 * rss / sigma2 + g_noise;
        Ok(lp + lp_noise)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, v, u, ul, s) = m.split(q);
        let layers = m.layers(beta, u)?;
        let gamma: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let lam = VectorLayer::new(&gamma, &m.radius_lambda, ul)?;
        let theta: Vec<f64> = layers.iter().flat_map(|l| l.point.theta.iter().copied()).collect();
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), count_nonzero(&lam.point.theta) as f64);
        extras.insert("loading_nonzero".into(), count_nonzero(&theta) as f64);
        extras.insert("sigma2".into(), s.exp());
        extras.insert("r_lambda".into(), lam.r);
        for (f, l) in lam.point.theta.iter().enumerate() {
            extras.insert(format!("lambda_{f}"), *l);
        }
        for (f, layer) in layers.iter().enumerate() {
            extras.insert(format!("r_{f}"), layer.r);
        }
        Ok(Draw { beta: beta.to_vec(), theta, r: lam.r, extras })
    }
}

impl Model for StructuredModel {
    fn name(&self) -> &str {
        "structured"
    }

    fn dim(&self) -> usize {
        let d = self.data.n_factors;
        d * self.data.p() + d + d * self.radius.n_params() + self.radius_lambda.n_params() + 1
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        Ok(Box::new(StructuredTarget { model: self, base_grad: vec![0.0; self.data.p()] }))
    }

    /// Spectral start: with `A₀` the off-diagonal part of `A` and `(e_k, v_k)`
    /// its leading eigenpairs, `θ_k = v_k` (`β_k` one step `0.05` outside
    /// the ball), `λ_k = max(e_k, 0.05)` inside a ball of radius `1.1·Σλ`,
    /// and `σ²` the residual variance of that fit.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let (p, d) = (self.data.p(), self.data.n_factors);
        let mut a0 = self.data.a.clone();
        a0.fill_diagonal(0.0);
        let eig = a0.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut q = Vec::with_capacity(self.dim());
        let mut radii = Vec::with_capacity(d);
        let mut lambda = Vec::with_capacity(d);
        let mut thetas = Vec::with_capacity(d);
        for k in 0..d {
            let (v, e): (Vec<f64>, f64) = match order.get(k) {
                Some(&i) if eig.eigenvalues[i] > 0.0 => (eig.eigenvectors.column(i).iter().copied().collect(), eig.eigenvalues[i]),
                _ => ((0..p).map(|_| rng.random_range(-0.1..0.1)).collect(), 0.0),
            };
            radii.push(v.iter().map(|x| x.abs()).sum::<f64>().max(1e-3));
            q.extend(v.iter().map(|&x| x + 0.05 * if x < 0.0 { -1.0 } else { 1.0 }));
            lambda.push(e.max(0.05));
            thetas.push(v);
        }
        q.extend(lambda.iter().map(|l| l.ln() + rng.random_range(-0.01..0.01)));
        for r in radii {
            q.extend(self.radius.init(r));
        }
        q.extend(self.radius_lambda.init(1.1 * lambda.iter().sum::<f64>()));
        let (_, _, _, rss) = pair_likelihood(&self.data, &thetas, &lambda, 1.0);
        let n_pairs = (p * (p - 1) / 2) as f64;
        q.push((rss / n_pairs).max(1e-4).ln());
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_connected_structure_leaves_ridge() {
        let cov = structured_base_covariance(&DMatrix::from_element(3, 3, 1.0), 0.5).unwrap();
        assert_eq!(cov, DMatrix::identity(3, 3) * 0.5);
    }

    #[test]
    fn indefinite_covariance_is_config_error() {
        // two communities: J − S has eigenvalues of both signs
        let mut s = DMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if (i < 2) == (j < 2) {
                    s[(i, j)] = 1.0;
                }
            }
        }
        assert!(matches!(structured_base_covariance(&s, 1e-3), Err(Error::Config(_))));
        assert!(structured_base_covariance(&s, 2.5).is_ok());
    }
}
