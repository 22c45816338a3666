use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{check_position, count_nonzero, reject_kink, InverseGamma, RadiusModel, VectorLayer};
use crate::error::{ensure_finite, ensure_radius, Error, Result};
use crate::priors::BaseDistribution;
use crate::projection::{nuclear_project, project_l1_ball, GeneralizedBall};
use crate::sampler::{Draw, Model, ProjectionWorkspace, Target, GRADIENT_FD_STEP};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `T` frames of `m × n` pixels, flattened to a `T × mn` matrix (one
/// row-major frame per row).
#[derive(Debug, Clone)]
pub struct LowRankSparseData {
    pub frames: DMatrix<f64>,
    pub frame_rows: usize,
    pub frame_cols: usize,
}

impl LowRankSparseData {
    pub fn new(frames: DMatrix<f64>, frame_rows: usize, frame_cols: usize) -> Result<Self> {
        if frames.nrows() == 0 {
            return Err(Error::Input("need at least one frame".into()));
        }
        if frames.ncols() != frame_rows * frame_cols || frames.ncols() == 0 {
            return Err(Error::Input(format!(
                "frames have {} pixels, expected {frame_rows}×{frame_cols}",
                frames.ncols()
            )));
        }
        ensure_finite(frames.as_slice(), "frames")?;
        Ok(Self { frames, frame_rows, frame_cols })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_pixels(&self) -> usize {
        self.frames.ncols()
    }

    /// Frames in row-major order (frame by frame).
    fn y(&self) -> Vec<f64> {
        let (t, mn) = (self.n_frames(), self.n_pixels());
        (0..t).flat_map(|i| (0..mn).map(move |j| (i, j))).map(|ij| self.frames[ij]).collect()
    }
}

fn gaussian(y: &[f64], fit: impl Iterator<Item = f64>, sigma2: f64) -> (f64, Vec<f64>) {
    let g: Vec<f64> = y.iter().zip(fit).map(|(y, f)| (y - f) / sigma2).collect();
    let rss: f64 = g.iter().map(|e| e * e).sum::<f64>() * sigma2 * sigma2;
    (-0.5 * y.len() as f64 * (LN_2PI + sigma2.ln()) - 0.5 * rss / sigma2, g)
}

/// Log-likelihood of the frames given `L = P_nuclear(L_beta, radii[0])` and
/// `S_t = P(S_betas[t], r_t)`, with `radii[1..]` holding one shared sparse
/// radius or one per frame.
pub fn lowrank_sparse_target(
    l_beta: &[f64],
    s_betas: &[f64],
    radii: &[f64],
    sigma2: f64,
    data: &LowRankSparseData,
) -> Result<f64> {
    let (t, mn) = (data.n_frames(), data.n_pixels());
    if l_beta.len() != t * mn || s_betas.len() != t * mn {
        return Err(Error::Input(format!("expected {} entries for L and for S", t * mn)));
    }
    if radii.len() != 2 && radii.len() != t + 1 {
        return Err(Error::Input(format!("expected 2 or {} radii, got {}", t + 1, radii.len())));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let l = nuclear_project(&DMatrix::from_row_slice(t, mn, l_beta), radii[0])?.l;
    let mut fit = Vec::with_capacity(t * mn);
    for f in 0..t {
        let r = if radii.len() == 2 { radii[1] } else { radii[1 + f] };
        ensure_radius(r)?;
        let s = project_l1_ball(&s_betas[f * mn..(f + 1) * mn], r)?.theta;
        fit.extend((0..mn).map(|j| l[(f, j)] + s[j]));
    }
    Ok(gaussian(&data.y(), fit.into_iter(), sigma2).0)
}

/// Low-rank background plus sparse changes: `Y = L + S + E` with `L` on a
/// nuclear-norm ball and each frame of `S` on its own vector l1-ball.
///
/// Position layout: `[B_L (T·mn), B_S (T·mn), radius of L (0 or 1),
/// radius of each S_t (0 or T), log σ²]`.
#[derive(Debug, Clone)]
pub struct LowRankSparseModel {
    data: LowRankSparseData,
    y: Vec<f64>,
    base_l: BaseDistribution,
    base_s: BaseDistribution,
    radius_l: RadiusModel,
    radius_s: RadiusModel,
    noise: InverseGamma,
}

impl LowRankSparseModel {
    pub fn new(
        data: LowRankSparseData,
        base_l: BaseDistribution,
        base_s: BaseDistribution,
        radius_l: RadiusModel,
        radius_s: RadiusModel,
        noise: InverseGamma,
    ) -> Result<Self> {
        radius_l.require_explicit("the low-rank component")?;
        radius_s.require_explicit("the sparse component")?;
        noise.validate()?;
        let size = data.n_frames() * data.n_pixels();
        if base_l.dim() != size || base_s.dim() != size {
            return Err(Error::Config(format!("both bases must have dimension T·mn = {size}")));
        }
        Ok(Self { y: data.y(), data, base_l, base_s, radius_l, radius_s, noise })
    }

    pub fn data(&self) -> &LowRankSparseData {
        &self.data
    }

    fn size(&self) -> usize {
        self.data.n_frames() * self.data.n_pixels()
    }

    fn n_sparse_radii(&self) -> usize {
        self.radius_s.n_params() * self.data.n_frames()
    }

    #[allow(clippy::type_complexity)]
    fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64], &'q [f64], &'q [f64], f64) {
        let size = self.size();
        let (bl, rest) = q.split_at(size);
        let (bs, rest) = rest.split_at(size);
        let (ul, rest) = rest.split_at(self.radius_l.n_params());
        let (us, rest) = rest.split_at(self.n_sparse_radii());
        (bl, bs, ul, us, rest[0])
    }

    fn frame_layers(&self, bs: &[f64], us: &[f64]) -> Result<Vec<VectorLayer>> {
        let mn = self.data.n_pixels();
        let k = self.radius_s.n_params();
        (0..self.data.n_frames())
            .map(|f| VectorLayer::new(&bs[f * mn..(f + 1) * mn], &self.radius_s, &us[f * k..(f + 1) * k]))
            .collect()
    }
}

struct LowRankTarget<'a> {
    model: &'a LowRankSparseModel,
    ws: ProjectionWorkspace,
    base_grad: Vec<f64>,
}

impl Target for LowRankTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (size, mn) = (m.size(), m.data.n_pixels());
        let (bl, bs, ul, us, s) = m.split(q);
        let rl = m.radius_l.eval(ul);
        let lpt = self.ws.project(bl, rl.value)?;
        let layers = m.frame_layers(bs, us)?;
        let sparse = layers.iter().flat_map(|l| l.point.theta.iter().copied());
        let sigma2 = s.exp();
        let (ll, g) = gaussian(&m.y, lpt.theta.iter().zip(sparse).map(|(a, b)| a + b), sigma2);

        let (_, vjp) = self.ws.vjp(bl, rl.value, &g, GRADIENT_FD_STEP)?;
        reject_kink(&vjp)?;
        m.base_l.grad_log_density(bl, &mut self.base_grad)?;
        for j in 0..size {
            grad[j] = vjp.beta[j] + self.base_grad[j];
        }
        m.base_s.grad_log_density(bs, &mut self.base_grad)?;
        let k = m.radius_s.n_params();
        let mut lp_radius = rl.log_density;
        for (f, layer) in layers.iter().enumerate() {
            let (gb, gu) = layer.vjp(&bs[f * mn..(f + 1) * mn], &g[f * mn..(f + 1) * mn]);
            for j in 0..mn {
                grad[size + f * mn + j] = gb[j] + self.base_grad[f * mn + j];
            }
            if k == 1 {
                grad[2 * size + ul.len() + f] = gu + layer.radius.grad;
            }
            lp_radius += layer.radius.log_density;
        }
        if !ul.is_empty() {
            grad[2 * size] = vjp.radius * rl.value + rl.grad;
        }
        let rss_term: f64 = g.iter().map(|e| e * e).sum::<f64>() * sigma2;
        let (lp_noise, g_noise) = m.noise.log_density_log_scale(s);
        grad[2 * size + ul.len() + us.len()] = -0.5 * size as f64 + 0.5 * rss_term + g_noise;
        Ok(ll + m.base_l.log_density(bl)? + m.base_s.log_density(bs)? + lp_radius + lp_noise)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (bl, bs, ul, us, s) = m.split(q);
        let rl = m.radius_l.eval(ul);
        let lpt = self.ws.project(bl, rl.value)?;
        let layers = m.frame_layers(bs, us)?;
        let mut theta = lpt.theta;
        let mut nnz = 0;
        for layer in &layers {
            nnz += count_nonzero(&layer.point.theta);
            theta.extend_from_slice(&layer.point.theta);
        }
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), lpt.support.len() as f64);
        extras.insert("sparse_nonzero".into(), nnz as f64);
        extras.insert("sigma2".into(), s.exp());
        for (f, layer) in layers.iter().enumerate() {
            extras.insert(format!("r_s_{f}"), layer.r);
        }
        let mut beta = bl.to_vec();
        beta.extend_from_slice(bs);
        Ok(Draw { beta, theta, r: rl.value, extras })
    }
}

impl Model for LowRankSparseModel {
    fn name(&self) -> &str {
        "lowrank"
    }

    fn dim(&self) -> usize {
        2 * self.size() + self.radius_l.n_params() + self.n_sparse_radii() + 1
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        let (t, mn) = (self.data.n_frames(), self.data.n_pixels());
        let ball = GeneralizedBall::Nuclear { rows: t, cols: mn, radius: 1.0 };
        let ws = ProjectionWorkspace::new(&ball)?;
        Ok(Box::new(LowRankTarget { model: self, ws, base_grad: vec![0.0; self.size()] }))
    }

    /// `B_L` at the frames, `B_S` near zero, radii at half the respective
    /// norms, and `σ²` at a tenth of the pixel variance.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let (t, mn) = (self.data.n_frames(), self.data.n_pixels());
        let mut q: Vec<f64> = self.y.iter().map(|y| y + rng.random_range(-0.01..0.01)).collect();
        let bs: Vec<f64> = (0..t * mn).map(|_| rng.random_range(-0.05..0.05)).collect();
        q.extend_from_slice(&bs);
        let nuclear: f64 = DMatrix::from_row_slice(t, mn, &self.y).singular_values().sum();
        q.extend(self.radius_l.init(0.5 * nuclear.max(1e-3)));
        if self.radius_s.n_params() == 1 {
            for f in 0..t {
                let l1: f64 = bs[f * mn..(f + 1) * mn].iter().map(|b| b.abs()).sum();
                q.extend(self.radius_s.init(0.5 * l1));
            }
        }
        let var = crate::stats::variance(&self.y).max(1e-6);
        q.push((0.1 * var).ln());
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frames_tiny_radii_are_noise_only() {
        let data = LowRankSparseData::new(DMatrix::zeros(3, 4), 2, 2).unwrap();
        let ll = lowrank_sparse_target(&[1.0; 12], &[1.0; 12], &[1e-12, 1e-12], 1.0, &data).unwrap();
        assert!((ll + 6.0 * LN_2PI).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_radius_count() {
        let data = LowRankSparseData::new(DMatrix::zeros(3, 4), 2, 2).unwrap();
        assert!(matches!(lowrank_sparse_target(&[0.0; 12], &[0.0; 12], &[1.0], 1.0, &data), Err(Error::Input(_))));
    }
}
