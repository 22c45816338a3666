//! Euclidean projections onto l1-balls and the augmented transform behind the
//! projected prior's change of variables.
//!
//! * [`project_l1_ball`]: exact projection onto `{x : ‖x‖₁ ≤ r}` by a sorted
//!   cumulative-sum scan.
//! * [`forward_transform`] / [`inverse_transform`]: the one-to-one map
//!   `β ↔ (t, s, μ)` whose Jacobian has unit absolute determinant.
//! * [`admm_project`]: projection onto `{z : ‖Dz‖₁ ≤ r}` for a linear map `D`.
//! * [`nuclear_project`]: projection onto a nuclear-norm ball via the SVD.

mod admm;
mod nuclear;
mod transform;
mod vector;

pub use admm::{admm_project, AdmmOptions, AdmmProjection, AdmmProjector, AdmmState};
pub use nuclear::{nuclear_project, NuclearProjection};
pub use transform::{forward_transform, inverse_transform, jacobian_abs_det, AugmentedState, DEFAULT_FD_STEP};
pub use vector::{project_l1_ball, soft_threshold, ProjectionResult};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `‖β‖₁ ≤ r·(1 + INTERIOR_RTOL)` counts as inside the ball.
pub const INTERIOR_RTOL: f64 = 1e-12;

/// Which l1-ball a parameter is projected onto.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneralizedBall {
    /// `{x : ‖x‖₁ ≤ r}`.
    Vector { radius: f64 },
    /// `{x : ‖Dx‖₁ ≤ r}` with `D` of shape `d × p`.
    LinearMap { d: DMatrix<f64>, radius: f64 },
    /// `{X : ‖X‖_* ≤ r}` for `rows × cols` matrices stored row-major.
    Nuclear { rows: usize, cols: usize, radius: f64 },
}

impl GeneralizedBall {
    pub fn radius(&self) -> f64 {
        match self {
            GeneralizedBall::Vector { radius }
            | GeneralizedBall::LinearMap { radius, .. }
            | GeneralizedBall::Nuclear { radius, .. } => *radius,
        }
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        let mut b = self.clone();
        match &mut b {
            GeneralizedBall::Vector { radius: r }
            | GeneralizedBall::LinearMap { radius: r, .. }
            | GeneralizedBall::Nuclear { radius: r, .. } => *r = radius,
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::ensure_radius(self.radius())?;
        match self {
            GeneralizedBall::Vector { .. } => Ok(()),
            GeneralizedBall::LinearMap { d, .. } => {
                if d.nrows() == 0 || d.ncols() == 0 {
                    return Err(Error::Input("linear map must have at least one row and column".into()));
                }
                crate::error::ensure_finite(d.as_slice(), "D")
            }
            GeneralizedBall::Nuclear { rows, cols, .. } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::Input("nuclear ball needs positive matrix dimensions".into()));
                }
                Ok(())
            }
        }
    }
}

/// First-difference operator over a `rows × cols` grid (row-major pixels):
/// vertical differences, then horizontal differences, then identity rows.
/// Shape is `((rows−1)·cols + rows·(cols−1) + rows·cols) × (rows·cols)`.
pub fn grid_contrast_matrix(rows: usize, cols: usize) -> DMatrix<f64> {
    let p = rows * cols;
    let d = rows.saturating_sub(1) * cols + rows * cols.saturating_sub(1) + p;
    let mut m = DMatrix::zeros(d, p);
    let idx = |i: usize, j: usize| i * cols + j;
    let mut row = 0;
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            m[(row, idx(i, j))] = 1.0;
            m[(row, idx(i + 1, j))] = -1.0;
            row += 1;
        }
    }
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            m[(row, idx(i, j))] = 1.0;
            m[(row, idx(i, j + 1))] = -1.0;
            row += 1;
        }
    }
    for k in 0..p {
        m[(row, k)] = 1.0;
        row += 1;
    }
    m
}

/// Chain first differences `x_i − x_{i+1}` for a length-`p` vector, shape `(p−1) × p`.
pub fn chain_difference_matrix(p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p.saturating_sub(1), p);
    for i in 0..p.saturating_sub(1) {
        m[(i, i)] = 1.0;
        m[(i, i + 1)] = -1.0;
    }
    m
}
