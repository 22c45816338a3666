use nalgebra::DMatrix;

use crate::error::{ensure_finite, ensure_radius, Error, Result};

use super::vector::project_l1_ball;

/// Latent coordinates `(t, s, μ)` of the augmented transform.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    /// `t_i = |β_i| − μ/c`. Positive exactly on the active set.
    pub t: Vec<f64>,
    /// `s_i = sign(β_i)` with `sign(0) = +1`.
    pub s: Vec<i8>,
    /// Total slack; zero in the interior.
    pub mu: f64,
}

/// Default relative finite-difference step used by [`jacobian_abs_det`].
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Computes `(t, s, μ)` from `β`.
pub fn forward_transform(beta: &[f64], r: f64) -> Result<AugmentedState> {
    let proj = project_l1_ball(beta, r)?;
    if !proj.boundary {
        return Ok(AugmentedState {
            t: beta.iter().map(|b| b.abs()).collect(),
            s: proj.signs,
            mu: 0.0,
        });
    }
    let tau = proj.threshold();
    Ok(AugmentedState {
        t: beta.iter().map(|b| b.abs() - tau).collect(),
        s: proj.signs,
        mu: proj.mu,
    })
}

fn sum_tolerance(r: f64, t: &[f64]) -> f64 {
    1e-10 * (r + t.iter().map(|x| x.abs()).sum::<f64>())
}

/// Maps `(t, s, μ)` back to `β_i = s_i (t_i + μ/|C|)` with `C = {i : t_i > 0}`.
///
/// Fails with a domain error if the state is not in the image of
/// [`forward_transform`] for radius `r`.
pub fn inverse_transform(state: &AugmentedState, r: f64) -> Result<Vec<f64>> {
    ensure_radius(r)?;
    ensure_finite(&state.t, "t")?;
    let p = state.t.len();
    if state.s.len() != p {
        return Err(Error::Input(format!("t has length {p} but s has length {}", state.s.len())));
    }
    if state.s.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::Domain("signs must be +1 or -1".into()));
    }
    if !state.mu.is_finite() || state.mu < 0.0 {
        return Err(Error::Domain(format!("mu must be finite and non-negative, got {}", state.mu)));
    }

    let active: Vec<usize> = (0..p).filter(|&i| state.t[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(vec![0.0; p]);
    }
    let c = active.len() as f64;
    let sum_active: f64 = active.iter().map(|&i| state.t[i]).sum();
    let tol = sum_tolerance(r, &state.t);

    if (sum_active - r).abs() <= tol {
        let floor = -state.mu / c;
        for i in 0..p {
            if state.t[i] <= 0.0 && (state.t[i] < floor - tol) {
                return Err(Error::Domain(format!(
                    "t[{i}] = {} is below -mu/|C| = {floor}",
                    state.t[i]
                )));
            }
        }
    } else if sum_active < r {
        if let Some(i) = state.t.iter().position(|&x| x < 0.0) {
            return Err(Error::Domain(format!(
                "t[{i}] < 0 requires the active coordinates to sum to r"
            )));
        }
        if state.mu != 0.0 {
            return Err(Error::Domain("interior states must have mu = 0".into()));
        }
    } else {
        return Err(Error::Domain(format!(
            "active coordinates sum to {sum_active}, exceeding r = {r}"
        )));
    }

    let shift = state.mu / c;
    Ok((0..p).map(|i| f64::from(state.s[i]) * (state.t[i] + shift)).collect())
}

/// Largest power of two not exceeding `h`, so that `x ± step` is exact for
/// most `x` and the central difference of a linear map carries no rounding.
fn dyadic_step(h: f64) -> f64 {
    2f64.powi(h.log2().floor() as i32)
}

/// Finite-difference estimate of `|det ∂f/∂β|` for the augmented transform.
///
/// On the boundary the continuous outputs are `t` with the largest-magnitude
/// active coordinate dropped (it is fixed by `Σ_C t = r`) plus `μ`; in the
/// interior they are `t` alone. The step for coordinate `i` is
/// `fd_step·(1 + |β_i|)`, rounded down to a power of two.
pub fn jacobian_abs_det(beta: &[f64], r: f64, fd_step: f64) -> Result<f64> {
    ensure_finite(beta, "beta")?;
    ensure_radius(r)?;
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Domain(format!("fd_step must be positive, got {fd_step}")));
    }
    let p = beta.len();
    let steps: Vec<f64> = beta.iter().map(|b| dyadic_step(fd_step * (1.0 + b.abs()))).collect();
    let max_step = steps.iter().cloned().fold(0.0, f64::max);

    for i in 0..p {
        if beta[i].abs() <= 2.0 * steps[i] {
            return Err(Error::Degenerate(format!("beta[{i}] is within the step of zero")));
        }
    }
    let norm: f64 = beta.iter().map(|b| b.abs()).sum();
    if (norm - r).abs() <= 4.0 * steps.iter().sum::<f64>() {
        return Err(Error::Degenerate("l1 norm is within the step of the radius".into()));
    }
    let base = project_l1_ball(beta, r)?;
    let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if base.boundary && mags.windows(2).any(|w| w[0] - w[1] <= 4.0 * max_step) {
        return Err(Error::Degenerate("tied magnitudes within the step".into()));
    }
    let tau = base.threshold();
    if base.boundary && beta.iter().any(|b| (b.abs() - tau).abs() <= 4.0 * (p as f64) * max_step) {
        return Err(Error::Degenerate("a magnitude sits at the threshold".into()));
    }

    let dropped = if base.boundary {
        base.active_set
            .iter()
            .copied()
            .max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs()).then(b.cmp(&a)))
    } else {
        None
    };
    let outputs = |state: &AugmentedState| -> Vec<f64> {
        let mut out: Vec<f64> = (0..p).filter(|&i| Some(i) != dropped).map(|i| state.t[i]).collect();
        if base.boundary {
            out.push(state.mu);
        }
        out
    };

    let mut jac = DMatrix::<f64>::zeros(p, p);
    let mut probe = beta.to_vec();
    for j in 0..p {
        let h = steps[j];
        probe[j] = beta[j] + h;
        let plus = project_l1_ball(&probe, r)?;
        let f_plus = forward_transform(&probe, r)?;
        probe[j] = beta[j] - h;
        let minus = project_l1_ball(&probe, r)?;
        let f_minus = forward_transform(&probe, r)?;
        probe[j] = beta[j];

        if plus.boundary != base.boundary
            || minus.boundary != base.boundary
            || plus.active_set != base.active_set
            || minus.active_set != base.active_set
            || f_plus.s != base.signs
            || f_minus.s != base.signs
        {
            return Err(Error::Degenerate(format!(
                "active set changes when perturbing coordinate {j}"
            )));
        }
        let (op, om) = (outputs(&f_plus), outputs(&f_minus));
        let width = (beta[j] + h) - (beta[j] - h);
        for i in 0..p {
            jac[(i, j)] = (op[i] - om[i]) / width;
        }
    }
    Ok(jac.lu().determinant().abs())
}
