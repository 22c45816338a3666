use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{ensure_finite, ensure_radius, Error, Result};

use super::vector::{project_l1_ball, sign_of};
use super::GeneralizedBall;

/// Tuning knobs for [`AdmmProjector::project`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    /// Penalty scale: the augmented term is `(2ρ)⁻¹‖Dz − s + κ‖²`.
    pub rho: f64,
    /// Stop once primal and dual residual norms drop below `tol·√dim`.
    pub tol: f64,
    pub max_iter: usize,
    /// Snap the iterate onto the face identified by the sparse split variable.
    pub polish: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { rho: 1.0, tol: 1e-8, max_iter: 20_000, polish: true }
    }
}

/// Iterate `(z, s, κ)`; pass the previous solve's state back in to warm-start.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub kappa: DVector<f64>,
}

/// Result of projecting onto `{z : ‖Dz‖₁ ≤ r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmProjection {
    pub z: Vec<f64>,
    /// `Dz` with literal zeros off the active set.
    pub contrasts: Vec<f64>,
    /// Indices of non-zero contrasts, ascending.
    pub active_set: Vec<usize>,
    /// Sign of each contrast, `+1` at zero.
    pub signs: Vec<i8>,
    /// `‖contrasts‖₁`.
    pub norm: f64,
    /// Whether the constraint is active (`‖Dβ‖₁ > r`).
    pub boundary: bool,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Whether the face-snapping step was accepted.
    pub polished: bool,
}

/// Projector for a fixed linear map `D` and penalty `ρ`, caching the Cholesky
/// factor of `2I + ρ⁻¹DᵀD`.
#[derive(Debug, Clone)]
pub struct AdmmProjector {
    d: DMatrix<f64>,
    rho: f64,
    chol: Cholesky<f64, Dyn>,
}

impl AdmmProjector {
    pub fn new(d: DMatrix<f64>, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::Input("linear map must be non-empty".into()));
        }
        ensure_finite(d.as_slice(), "D")?;
        let p = d.ncols();
        let m = DMatrix::<f64>::identity(p, p) * 2.0 + d.transpose() * &d / rho;
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Numerical("Cholesky of 2I + DᵀD/ρ failed".into()))?;
        Ok(Self { d, rho, chol })
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Cold-start state for input `beta`.
    pub fn initial_state(&self, beta: &[f64], r: f64) -> Result<AdmmState> {
        let z = DVector::from_column_slice(beta);
        let dz = &self.d * &z;
        let s = DVector::from_vec(project_l1_ball(dz.as_slice(), r)?.theta);
        Ok(AdmmState { z, s, kappa: DVector::zeros(self.d.nrows()) })
    }

    /// Projects `beta` onto `{z : ‖Dz‖₁ ≤ r}`. `opts.rho` is ignored in favour of
    /// the cached factor's penalty. When `state` is given it seeds the
    /// iteration and receives the final iterate.
    pub fn project(
        &self,
        beta: &[f64],
        r: f64,
        opts: &AdmmOptions,
        state: Option<&mut AdmmState>,
    ) -> Result<AdmmProjection> {
        ensure_finite(beta, "beta")?;
        ensure_radius(r)?;
        let p = self.d.ncols();
        let m = self.d.nrows();
        if beta.len() != p {
            return Err(Error::Input(format!("beta has length {} but D has {p} columns", beta.len())));
        }
        if !(opts.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be positive, got {}", opts.tol)));
        }

        let b = DVector::from_column_slice(beta);
        let db = &self.d * &b;
        if db.iter().map(|x| x.abs()).sum::<f64>() <= r * (1.0 + super::INTERIOR_RTOL) {
            if let Some(st) = state {
                st.z = b.clone();
                st.s = db.clone();
                st.kappa.fill(0.0);
            }
            return Ok(self.finish(beta.to_vec(), db.as_slice(), None, false, 0, 0.0, 0.0, false));
        }

        let mut local;
        let st = match state {
            Some(st) if st.z.len() == p && st.s.len() == m && st.kappa.len() == m => st,
            other => {
                local = self.initial_state(beta, r)?;
                match other {
                    Some(st) => {
                        *st = local.clone();
                        st
                    }
                    None => &mut local,
                }
            }
        };

        let inv_rho = 1.0 / self.rho;
        let two_b = &b * 2.0;
        let primal_tol = opts.tol * (m as f64).sqrt();
        let dual_tol = opts.tol * (p as f64).sqrt();
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            let rhs = &two_b + self.d.tr_mul(&(&st.s - &st.kappa)) * inv_rho;
            st.z = self.chol.solve(&rhs);
            let dz = &self.d * &st.z;
            let s_prev = std::mem::replace(
                &mut st.s,
                DVector::from_vec(project_l1_ball((&dz + &st.kappa).as_slice(), r)?.theta),
            );
            let diff = &dz - &st.s;
            st.kappa += &diff;
            primal = diff.norm();
            dual = (self.d.tr_mul(&(&st.s - &s_prev)) * inv_rho).norm();
            if primal < primal_tol && dual < dual_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence { iterations, primal, dual });
        }

        let z_admm: Vec<f64> = st.z.iter().copied().collect();
        let support: Vec<bool> = st.s.iter().map(|&v| v != 0.0).collect();
        if opts.polish {
            let signs: Vec<i8> = st.s.iter().map(|&v| sign_of(v)).collect();
            let scale = 1.0 + st.s.amax();
            // contrasts ADMM left at round-off size are tried as zeros
            for cut in [0.0, 1e-7, 1e-5] {
                let trial: Vec<bool> = st.s.iter().map(|&v| v.abs() > cut * scale).collect();
                if cut > 0.0 && trial == support {
                    continue;
                }
                if let Some(z) = self.polish(&b, &trial, &signs, r, &z_admm, 1e-5) {
                    let dz = &self.d * DVector::from_column_slice(&z);
                    return Ok(self.finish(z, dz.as_slice(), Some(&trial), true, iterations, primal, dual, true));
                }
            }
        }
        let dz = &self.d * &st.z;
        Ok(self.finish(z_admm, dz.as_slice(), Some(&support), true, iterations, primal, dual, false))
    }

    /// Re-solves at `beta` on the face of a previous boundary solution
    /// `reference`: the contrasts outside its active set stay zero and those
    /// inside keep their signs. Returns `None` when the face is no longer
    /// consistent or the result moves further than `max_shift` (relative to
    /// `1 + ‖β‖∞`) from the reference point.
    pub fn project_on_face(
        &self,
        beta: &[f64],
        r: f64,
        reference: &AdmmProjection,
        max_shift: f64,
    ) -> Option<AdmmProjection> {
        if !reference.boundary || !reference.polished || beta.len() != self.d.ncols() {
            return None;
        }
        let b = DVector::from_column_slice(beta);
        let db = &self.d * &b;
        if db.iter().map(|x| x.abs()).sum::<f64>() <= r * (1.0 + super::INTERIOR_RTOL) {
            return None;
        }
        let support: Vec<bool> = reference.contrasts.iter().map(|&v| v != 0.0).collect();
        let z = self.polish(&b, &support, &reference.signs, r, &reference.z, max_shift)?;
        let dz = &self.d * DVector::from_column_slice(&z);
        Some(self.finish(z, dz.as_slice(), Some(&support), true, 0, 0.0, 0.0, true))
    }

    /// Rows `[σ_Sᵀ D_S; D_Z]` defining the affine hull of a boundary face.
    fn face_matrix(&self, support: &[bool], signs: &[i8]) -> DMatrix<f64> {
        let p = self.d.ncols();
        let m = support.len();
        let zero_rows: Vec<usize> = (0..m).filter(|&k| !support[k]).collect();
        let mut a = DMatrix::<f64>::zeros(1 + zero_rows.len(), p);
        for k in (0..m).filter(|&k| support[k]) {
            let sg = f64::from(signs[k]);
            for j in 0..p {
                a[(0, j)] += sg * self.d[(k, j)];
            }
        }
        for (row, &k) in zero_rows.iter().enumerate() {
            a.row_mut(row + 1).copy_from(&self.d.row(k));
        }
        a
    }

    /// Vector-Jacobian product of the projection on the face of a polished
    /// boundary solution. On that face `z = β − A⁺(Aβ − r e₁)`, so the
    /// product with `g` is `((I − A⁺A)g, gᵀA⁺e₁)`.
    pub fn face_vjp(&self, reference: &AdmmProjection, g: &[f64]) -> Option<(Vec<f64>, f64)> {
        if !reference.boundary || !reference.polished || g.len() != self.d.ncols() {
            return None;
        }
        let support: Vec<bool> = reference.contrasts.iter().map(|&v| v != 0.0).collect();
        let a = self.face_matrix(&support, &reference.signs);
        let g = DVector::from_column_slice(g);
        let at = a.transpose();
        let svd = at.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        // w = (Aᵀ)⁺ g = (A⁺)ᵀ g
        let w = svd.solve(&g, eps).ok()?;
        let out = &g - at * &w;
        Some((out.iter().copied().collect(), w[0]))
    }

    /// Least-norm correction of `beta` onto the face `{σᵀD_S z = r, D_Z z = 0}`
    /// given by `support` and `signs`, accepted only if the signs persist, the
    /// constraint holds and the point lies within `max_shift·(1 + ‖β‖∞)` of `z_ref`.
    fn polish(
        &self,
        beta: &DVector<f64>,
        support: &[bool],
        signs: &[i8],
        r: f64,
        z_ref: &[f64],
        max_shift: f64,
    ) -> Option<Vec<f64>> {
        let m = support.len();
        let a = self.face_matrix(support, signs);
        let mut rhs = DVector::<f64>::zeros(a.nrows());
        rhs[0] = r;
        let resid = rhs - &a * beta;
        let svd = a.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let corr = svd.solve(&resid, eps).ok()?;
        let z = beta + corr;

        let dz = &self.d * &z;
        for k in 0..m {
            if support[k] && (dz[k] == 0.0 || sign_of(dz[k]) != signs[k]) {
                return None;
            }
        }
        let norm: f64 = (0..m).filter(|&k| support[k]).map(|k| dz[k].abs()).sum();
        if norm > r * (1.0 + 1e-9) {
            return None;
        }
        let scale = 1.0 + beta.amax();
        if z.iter().zip(z_ref).any(|(a, b)| (a - b).abs() > max_shift * scale) {
            return None;
        }
        Some(z.iter().copied().collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        z: Vec<f64>,
        dz: &[f64],
        support: Option<&[bool]>,
        boundary: bool,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        polished: bool,
    ) -> AdmmProjection {
        let contrasts: Vec<f64> = match support {
            Some(sup) if polished => dz.iter().zip(sup).map(|(&v, &on)| if on { v } else { 0.0 }).collect(),
            _ => dz.to_vec(),
        };
        let active_set = (0..contrasts.len()).filter(|&k| contrasts[k] != 0.0).collect();
        let signs = contrasts.iter().map(|&v| sign_of(v)).collect();
        let norm = contrasts.iter().map(|v| v.abs()).sum();
        AdmmProjection {
            z,
            contrasts,
            active_set,
            signs,
            norm,
            boundary,
            iterations,
            primal_residual,
            dual_residual,
            polished,
        }
    }
}

/// One-shot projection onto a [`GeneralizedBall::LinearMap`] ball.
pub fn admm_project(
    beta: &[f64],
    ball: &GeneralizedBall,
    rho: f64,
    tol: f64,
    max_iter: usize,
) -> Result<AdmmProjection> {
    let GeneralizedBall::LinearMap { d, radius } = ball else {
        return Err(Error::Domain("admm_project requires a linear-map ball".into()));
    };
    ball.validate()?;
    let proj = AdmmProjector::new(d.clone(), rho)?;
    let opts = AdmmOptions { rho, tol, max_iter, polish: true };
    proj.project(beta, *radius, &opts, None)
}
