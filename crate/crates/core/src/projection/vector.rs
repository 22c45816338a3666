use crate::error::{ensure_finite, ensure_radius, Result};

use super::INTERIOR_RTOL;

/// Output of a projection onto the vector l1-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// The projected point. Entries outside `active_set` are literal `0.0`.
    pub theta: Vec<f64>,
    /// Indices of the non-zero entries of `theta`, ascending.
    pub active_set: Vec<usize>,
    /// Total slack `μ_c = Σ_{i∈C} |β_i| − r`; zero for interior inputs.
    pub mu: f64,
    /// `sign(β_i)`, with `sign(0) = +1`.
    pub signs: Vec<i8>,
    /// Whether the input was outside the ball (so `‖theta‖₁ = r`).
    pub boundary: bool,
}

impl ProjectionResult {
    /// `|C|`.
    pub fn cardinality(&self) -> usize {
        self.active_set.len()
    }

    /// Soft-threshold level `μ_c / c` (zero in the interior).
    pub fn threshold(&self) -> f64 {
        if self.boundary && !self.active_set.is_empty() {
            self.mu / self.active_set.len() as f64
        } else {
            0.0
        }
    }
}

pub(crate) fn sign_of(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// `sign(x)·(|x| − tau)₊`, writing a literal zero below the threshold.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    let m = x.abs() - tau;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Projects `beta` onto `{x : ‖x‖₁ ≤ r}`.
///
/// Magnitudes are sorted in decreasing order (ties broken by ascending index;
/// the projected value does not depend on the tie order), then
/// `c = max{j : |β_(j)| > μ_j / j}` with `μ_j = (Σ_{i≤j} |β_(i)| − r)₊`, and
/// `θ_i = sign(β_i)(|β_i| − μ_c/c)₊`.
pub fn project_l1_ball(beta: &[f64], r: f64) -> Result<ProjectionResult> {
    ensure_finite(beta, "beta")?;
    ensure_radius(r)?;
    let signs: Vec<i8> = beta.iter().map(|&b| sign_of(b)).collect();
    let norm: f64 = beta.iter().map(|b| b.abs()).sum();

    if norm <= r * (1.0 + INTERIOR_RTOL) {
        let active_set = (0..beta.len()).filter(|&i| beta[i] != 0.0).collect();
        return Ok(ProjectionResult {
            theta: beta.to_vec(),
            active_set,
            mu: 0.0,
            signs,
            boundary: false,
        });
    }

    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));

    let mut cumsum = 0.0;
    let mut c = 0;
    let mut mu_c = 0.0;
    for (j, &i) in order.iter().enumerate() {
        let mag = beta[i].abs();
        cumsum += mag;
        let mu_j = (cumsum - r).max(0.0);
        if mag > mu_j / (j + 1) as f64 {
            c = j + 1;
            mu_c = mu_j;
        }
    }
    let tau = mu_c / c as f64;

    let theta: Vec<f64> = beta.iter().map(|&b| soft_threshold(b, tau)).collect();
    let active_set = (0..beta.len()).filter(|&i| theta[i] != 0.0).collect();
    Ok(ProjectionResult {
        theta,
        active_set,
        mu: mu_c,
        signs,
        boundary: true,
    })
}
