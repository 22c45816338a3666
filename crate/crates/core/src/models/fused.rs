use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use super::{check_position, reject_kink, InverseGamma, RadiusModel};
use crate::error::{ensure_finite, Error, Result};
use crate::priors::BaseDistribution;
use crate::projection::{grid_contrast_matrix, AdmmOptions, AdmmProjector, GeneralizedBall};
use crate::sampler::{BallPoint, Draw, Model, ProjectionWorkspace, Target, GRADIENT_FD_STEP};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A noisy `p1 × p2` image, modelled as `y_ij = μ + θ_ij + ε_ij`.
#[derive(Debug, Clone)]
pub struct GridData {
    pub pixels: DMatrix<f64>,
}

impl GridData {
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        if pixels.nrows() < 2 || pixels.ncols() < 2 {
            return Err(Error::Input(format!("grid must be at least 2×2, got {}×{}", pixels.nrows(), pixels.ncols())));
        }
        ensure_finite(pixels.as_slice(), "pixels")?;
        Ok(Self { pixels })
    }

    pub fn rows(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn n_pixels(&self) -> usize {
        self.pixels.len()
    }

    /// Pixels in row-major order.
    pub fn y(&self) -> Vec<f64> {
        (0..self.rows()).flat_map(|i| (0..self.cols()).map(move |j| (i, j))).map(|ij| self.pixels[ij]).collect()
    }

    /// The vertical, horizontal and identity contrasts; see [`grid_contrast_matrix`].
    pub fn contrast_matrix(&self) -> DMatrix<f64> {
        grid_contrast_matrix(self.rows(), self.cols())
    }

    /// Number of neighbour contrasts (the rows of `D` before the identity block).
    pub fn n_edges(&self) -> usize {
        (self.rows() - 1) * self.cols() + self.rows() * (self.cols() - 1)
    }

    /// Pixel pairs of each neighbour contrast, in the row order of `D`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.rows(), self.cols());
        let idx = |i: usize, j: usize| i * cols + j;
        let mut e = Vec::with_capacity(self.n_edges());
        for i in 0..rows - 1 {
            for j in 0..cols {
                e.push((idx(i, j), idx(i + 1, j)));
            }
        }
        for i in 0..rows {
            for j in 0..cols - 1 {
                e.push((idx(i, j), idx(i, j + 1)));
            }
        }
        e
    }

    /// Per pixel: whether it differs from at least one of its four neighbours.
    pub fn neighbor_change(&self, theta: &[f64]) -> Vec<bool> {
        let mut out = vec![false; theta.len()];
        for (a, b) in self.edges() {
            if theta[a] != theta[b] {
                out[a] = true;
                out[b] = true;
            }
        }
        out
    }

    /// Sets every group of pixels joined by zero contrasts to its common value,
    /// and to zero when any identity contrast in the group is zero, so that
    /// the zeros of `Dθ` are literal.
    fn snap(&self, z: &[f64], support: &[usize]) -> Vec<f64> {
        let p = z.len();
        let n_edges = self.n_edges();
        let mut active = vec![false; n_edges + p];
        for &k in support {
            active[k] = true;
        }
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (k, (a, b)) in self.edges().into_iter().enumerate() {
            if !active[k] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let mut sum = vec![0.0; p];
        let mut count = vec![0usize; p];
        let mut zero = vec![false; p];
        for i in 0..p {
            let root = find(&mut parent, i);
            sum[root] += z[i];
            count[root] += 1;
            if !active[n_edges + i] {
                zero[root] = true;
            }
        }
        (0..p)
            .map(|i| {
                let root = find(&mut parent, i);
                if zero[root] {
                    0.0
                } else {
                    sum[root] / count[root] as f64
                }
            })
            .collect()
    }
}

fn gaussian_pixels(y: &[f64], mu: f64, theta: &[f64], sigma2: f64) -> (f64, Vec<f64>) {
    let resid: Vec<f64> = y.iter().zip(theta).map(|(y, t)| y - mu - t).collect();
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let ll = -0.5 * y.len() as f64 * (LN_2PI + sigma2.ln()) - 0.5 * rss / sigma2;
    (ll, resid.iter().map(|e| e / sigma2).collect())
}

/// Log-likelihood of the image given `θ = P(β)` onto `{‖Dθ‖₁ ≤ r}`, the
/// offset `μ` and noise variance `σ²`.
pub fn fused_target(beta: &[f64], r: f64, mu: f64, sigma2: f64, data: &GridData) -> Result<f64> {
    if beta.len() != data.n_pixels() {
        return Err(Error::Input(format!("beta has length {}, expected {}", beta.len(), data.n_pixels())));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let projector = AdmmProjector::new(data.contrast_matrix(), 1.0)?;
    let res = projector.project(beta, r, &AdmmOptions::default(), None)?;
    Ok(gaussian_pixels(&data.y(), mu, &res.z, sigma2).0)
}

/// Piecewise-constant image smoothing with sparse neighbour contrasts.
///
/// Position layout: `[β (p1·p2), radius (0 or 1), μ, log σ²]` with
/// `μ ∼ N(0, mu_sd²)` and `σ² ∼ Inverse-Gamma`.
#[derive(Debug, Clone)]
pub struct FusedModel {
    data: GridData,
    y: Vec<f64>,
    ball: GeneralizedBall,
    base: BaseDistribution,
    radius: RadiusModel,
    mu_sd: f64,
    noise: InverseGamma,
}

impl FusedModel {
    pub fn new(data: GridData, base: BaseDistribution, radius: RadiusModel, mu_sd: f64, noise: InverseGamma) -> Result<Self> {
        radius.require_explicit("the fused model")?;
        noise.validate()?;
        if base.dim() != data.n_pixels() {
            return Err(Error::Config(format!("base has dimension {} but the grid has {} pixels", base.dim(), data.n_pixels())));
        }
        if !(mu_sd > 0.0) {
            return Err(Error::Config(format!("mu_sd must be positive, got {mu_sd}")));
        }
        let initial_r = match radius {
            RadiusModel::Fixed(r) => r,
            RadiusModel::Random(_) => 1.0,
        };
        let ball = GeneralizedBall::LinearMap { d: data.contrast_matrix(), radius: initial_r };
        // fail early on a singular factorization
        AdmmProjector::new(data.contrast_matrix(), 1.0)?;
        Ok(Self { y: data.y(), data, ball, base, radius, mu_sd, noise })
    }

    pub fn data(&self) -> &GridData {
        &self.data
    }

    fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64], f64, f64) {
        let p = self.data.n_pixels();
        let k = self.radius.n_params();
        (&q[..p], &q[p..p + k], q[p + k], q[p + k + 1])
    }
}

struct FusedTarget<'a> {
    model: &'a FusedModel,
    ws: ProjectionWorkspace,
    base_grad: Vec<f64>,
}

impl FusedTarget<'_> {
    fn theta(&self, point: &BallPoint) -> Vec<f64> {
        if point.exact && point.boundary {
            self.model.data.snap(&point.theta, &point.support)
        } else {
            point.theta.clone()
        }
    }
}

impl Target for FusedTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u, mu, s) = m.split(q);
        let p = beta.len();
        let radius = m.radius.eval(u);
        let point = self.ws.project(beta, radius.value)?;
        let sigma2 = s.exp();
        let (ll, g_theta) = gaussian_pixels(&m.y, mu, &point.theta, sigma2);
        let (_, vjp) = self.ws.vjp(beta, radius.value, &g_theta, GRADIENT_FD_STEP)?;
        reject_kink(&vjp)?;
        m.base.grad_log_density(beta, &mut self.base_grad)?;
        for j in 0..p {
            grad[j] = vjp.beta[j] + self.base_grad[j];
        }
        if !u.is_empty() {
            grad[p] = vjp.radius * radius.value + radius.grad;
        }
        let g_mu: f64 = g_theta.iter().sum();
        grad[p + u.len()] = g_mu - mu / (m.mu_sd * m.mu_sd);
        let rss_term: f64 = g_theta.iter().map(|g| g * g).sum::<f64>() * sigma2;
        let (lp_noise, g_noise) = m.noise.log_density_log_scale(s);
        grad[p + u.len() + 1] = -0.5 * p as f64 + 0.5 * rss_term + g_noise;
        let lp_mu = -0.5 * (mu / m.mu_sd).powi(2);
        Ok(ll + m.base.log_density(beta)? + radius.log_density + lp_mu + lp_noise)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u, mu, s) = m.split(q);
        let radius = m.radius.eval(u);
        let point = self.ws.project(beta, radius.value)?;
        let theta = self.theta(&point);
        let changes = m.data.edges().iter().filter(|&&(a, b)| theta[a] != theta[b]).count();
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), changes as f64);
        extras.insert("mu".into(), mu);
        extras.insert("sigma2".into(), s.exp());
        extras.insert("exact".into(), if point.exact { 1.0 } else { 0.0 });
        Ok(Draw { beta: beta.to_vec(), theta, r: radius.value, extras })
    }
}

impl Model for FusedModel {
    fn name(&self) -> &str {
        "fused"
    }

    fn dim(&self) -> usize {
        self.data.n_pixels() + self.radius.n_params() + 2
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        let ws = ProjectionWorkspace::new(&self.ball)?;
        Ok(Box::new(FusedTarget { model: self, ws, base_grad: vec![0.0; self.data.n_pixels()] }))
    }

    /// Centred pixels with a little jitter, a radius halving `‖Dβ‖₁`, `μ` at
    /// the image mean and `σ²` at the image variance.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mean = crate::stats::mean(&self.y);
        let var = crate::stats::variance(&self.y).max(1e-6);
        let mut q: Vec<f64> = self.y.iter().map(|y| y - mean + rng.random_range(-0.01..0.01)).collect();
        let d = self.data.contrast_matrix();
        let l1 = (&d * DVector::from_column_slice(&q)).abs().sum();
        q.extend(self.radius.init(0.5 * l1));
        q.push(mean);
        q.push(var.ln());
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_large_radius_has_no_contrasts() {
        let data = GridData::new(DMatrix::from_element(3, 3, 2.0)).unwrap();
        let ll = fused_target(&[0.0; 9], 100.0, 2.0, 1.0, &data).unwrap();
        assert!((ll + 4.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn snap_merges_zero_contrast_groups() {
        let data = GridData::new(DMatrix::zeros(2, 2)).unwrap();
        // rows: vertical (0,2), (1,3); horizontal (0,1), (2,3); then identity
        let z = [1.0 + 1e-15, 2.0, 1.0, 2.0 - 1e-15];
        let support = [2, 3, 4, 5, 6, 7];
        let t = data.snap(&z, &support);
        assert_eq!(t[0], t[2]);
        assert_eq!(t[1], t[3]);
        assert_ne!(t[0], t[1]);
        assert_eq!(data.neighbor_change(&t), vec![true, true, true, true]);
    }
}
