use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::projection::{
    nuclear_project, project_l1_ball, AdmmOptions, AdmmProjector, AdmmState, GeneralizedBall,
};

/// Relative step for finite-difference gradients through generalized balls.
pub const GRADIENT_FD_STEP: f64 = 1e-5;

/// Vector-Jacobian product of `θ = P(β, r)` with a downstream gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionVjp {
    /// `(∂θ/∂β)ᵀ g`.
    pub beta: Vec<f64>,
    /// `gᵀ ∂θ/∂r`.
    pub radius: f64,
    /// One-sided derivatives disagreed or the active set moved within the step.
    pub kink: bool,
}

/// Projection output in the form the models consume.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    /// The projected parameter (a row-major matrix for nuclear balls).
    pub theta: Vec<f64>,
    /// Non-zero coordinates of `θ`, of `Dθ`, or of the spectrum.
    pub support: Vec<usize>,
    pub boundary: bool,
    /// Whether the iterate was snapped exactly onto its face (always true
    /// for the closed-form projections).
    pub exact: bool,
}

/// Per-chain projection state: the cached ADMM factor and the warm start.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    ball: GeneralizedBall,
    admm: Option<AdmmProjector>,
    warm: Option<AdmmState>,
    opts: AdmmOptions,
}

impl ProjectionWorkspace {
    pub fn new(ball: &GeneralizedBall) -> Result<Self> {
        Self::with_options(ball, AdmmOptions::default())
    }

    pub fn with_options(ball: &GeneralizedBall, opts: AdmmOptions) -> Result<Self> {
        ball.validate()?;
        let admm = match ball {
            GeneralizedBall::LinearMap { d, .. } => Some(AdmmProjector::new(d.clone(), opts.rho)?),
            _ => None,
        };
        Ok(Self { ball: ball.clone(), admm, warm: None, opts })
    }

    pub fn ball(&self) -> &GeneralizedBall {
        &self.ball
    }

    fn solve(&self, beta: &[f64], r: f64, warm: Option<&mut AdmmState>) -> Result<BallPoint> {
        match &self.ball {
            GeneralizedBall::Vector { .. } => {
                let res = project_l1_ball(beta, r)?;
                Ok(BallPoint { theta: res.theta, support: res.active_set, boundary: res.boundary, exact: true })
            }
            GeneralizedBall::LinearMap { .. } => {
                let admm = self.admm.as_ref().expect("linear-map workspace owns a projector");
                let res = admm.project(beta, r, &self.opts, warm)?;
                let exact = res.polished || !res.boundary;
                Ok(BallPoint { theta: res.z, support: res.active_set, boundary: res.boundary, exact })
            }
            GeneralizedBall::Nuclear { rows, cols, .. } => {
                if beta.len() != rows * cols {
                    return Err(Error::Input(format!("expected {} entries, got {}", rows * cols, beta.len())));
                }
                let b = DMatrix::from_row_slice(*rows, *cols, beta);
                let res = nuclear_project(&b, r)?;
                let theta = (0..*rows).flat_map(|i| (0..*cols).map(move |j| (i, j))).map(|ij| res.l[ij]).collect();
                let support = (0..res.singular_values.len()).filter(|&k| res.singular_values[k] != 0.0).collect();
                Ok(BallPoint { theta, support, boundary: res.boundary, exact: true })
            }
        }
    }

    /// Projects `beta` onto the ball of radius `r`, warm-starting ADMM from
    /// the previous call.
    pub fn project(&mut self, beta: &[f64], r: f64) -> Result<BallPoint> {
        let Some(admm) = &self.admm else {
            return self.solve(beta, r, None);
        };
        let mut warm = match self.warm.take() {
            Some(w) => w,
            None => admm.initial_state(beta, r)?,
        };
        let out = self.solve(beta, r, Some(&mut warm));
        self.warm = out.is_ok().then_some(warm);
        out
    }

    /// Projects and computes the vector-Jacobian product with `g`.
    ///
    /// The vector ball uses the closed form `g_j − s_j (Σ_C g_i s_i)/|C|` on
    /// the active set and linear-map balls the affine map of the polished
    /// face; both are the one-sided Jacobian of the piece containing `β`. The
    /// nuclear ball uses central differences with step `fd_step·(1 + |β_j|)`.
    /// `kink` is set when the face could not be identified or the rank moved
    /// within the step.
    pub fn vjp(&mut self, beta: &[f64], r: f64, g: &[f64], fd_step: f64) -> Result<(BallPoint, ProjectionVjp)> {
        if let Some(admm) = &self.admm {
            let mut warm = match self.warm.take() {
                Some(w) => w,
                None => admm.initial_state(beta, r)?,
            };
            let res = admm.project(beta, r, &self.opts, Some(&mut warm));
            self.warm = res.is_ok().then_some(warm);
            let res = res?;
            check_gradient_len(g, res.z.len())?;
            let exact = res.polished || !res.boundary;
            let vjp = if !res.boundary {
                ProjectionVjp { beta: g.to_vec(), radius: 0.0, kink: false }
            } else {
                match admm.face_vjp(&res, g) {
                    Some((beta, radius)) => ProjectionVjp { beta, radius, kink: false },
                    None => ProjectionVjp { beta: g.to_vec(), radius: 0.0, kink: true },
                }
            };
            let base = BallPoint { theta: res.z, support: res.active_set, boundary: res.boundary, exact };
            return Ok((base, vjp));
        }
        let base = self.project(beta, r)?;
        check_gradient_len(g, base.theta.len())?;
        if let GeneralizedBall::Vector { .. } = self.ball {
            let vjp = vector_vjp(beta, &base, g);
            return Ok((base, vjp));
        }
        if !base.boundary {
            let vjp = ProjectionVjp { beta: g.to_vec(), radius: 0.0, kink: false };
            return Ok((base, vjp));
        }

        let dot = |theta: &[f64]| -> f64 { theta.iter().zip(g).map(|(a, b)| a * b).sum() };
        let mut kink = false;
        let mut eval = |probe: &[f64], radius: f64| -> Result<f64> {
            let pt = self.solve(probe, radius, None)?;
            kink |= pt.support != base.support || pt.boundary != base.boundary;
            Ok(dot(&pt.theta))
        };
        let mut probe = beta.to_vec();
        let mut grad = vec![0.0; beta.len()];
        for j in 0..beta.len() {
            let h = fd_step * (1.0 + beta[j].abs());
            probe[j] = beta[j] + h;
            let fp = eval(&probe, r)?;
            probe[j] = beta[j] - h;
            let fm = eval(&probe, r)?;
            probe[j] = beta[j];
            grad[j] = (fp - fm) / ((beta[j] + h) - (beta[j] - h));
        }
        let h = (fd_step * (1.0 + r)).min(0.5 * r);
        let fp = eval(beta, r + h)?;
        let fm = eval(beta, r - h)?;
        let d_r = (fp - fm) / ((r + h) - (r - h));
        Ok((base, ProjectionVjp { beta: grad, radius: d_r, kink }))
    }
}

fn check_gradient_len(g: &[f64], n: usize) -> Result<()> {
    if g.len() != n {
        return Err(Error::Input(format!("downstream gradient has length {}, expected {n}", g.len())));
    }
    Ok(())
}

pub(crate) fn vector_vjp(beta: &[f64], base: &BallPoint, g: &[f64]) -> ProjectionVjp {
    if !base.boundary {
        return ProjectionVjp { beta: g.to_vec(), radius: 0.0, kink: false };
    }
    let c = base.support.len() as f64;
    let sign = |i: usize| if beta[i] < 0.0 { -1.0 } else { 1.0 };
    let sg: f64 = base.support.iter().map(|&i| g[i] * sign(i)).sum();
    let mut out = vec![0.0; beta.len()];
    for &i in &base.support {
        out[i] = g[i] - sign(i) * sg / c;
    }
    ProjectionVjp { beta: out, radius: sg / c, kink: false }
}

/// Vector-Jacobian product of the projection onto `ball` at `beta`.
pub fn gradient_through_projection(
    beta: &[f64],
    ball: &GeneralizedBall,
    downstream_grad: &[f64],
    fd_step: f64,
) -> Result<ProjectionVjp> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Domain(format!("fd_step must be positive, got {fd_step}")));
    }
    let mut ws = ProjectionWorkspace::new(ball)?;
    ws.vjp(beta, ball.radius(), downstream_grad, fd_step).map(|(_, v)| v)
}
