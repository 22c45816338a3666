//! Projections against independent oracles: KKT bisection for the vector
//! ball, face enumeration for `{‖Dz‖₁ ≤ r}`, and the defining properties of
//! the augmented transform and the nuclear ball.

use l1ball::projection::{
    admm_project, forward_transform, inverse_transform, nuclear_project, project_l1_ball, GeneralizedBall,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Soft-thresholding at the `τ` solving `Σ(|β_i| − τ)₊ = r`, found by bisection.
fn kkt_bisection(beta: &[f64], r: f64) -> Vec<f64> {
    if beta.iter().map(|b| b.abs()).sum::<f64>() <= r {
        return beta.to_vec();
    }
    let mass = |tau: f64| beta.iter().map(|b| (b.abs() - tau).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, beta.iter().fold(0.0f64, |m, b| m.max(b.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    beta.iter().map(|b| b.signum() * (b.abs() - tau).max(0.0)).collect()
}

/// Projection onto `{‖Dz‖₁ ≤ r}` by enumerating faces. Each zero pattern and
/// sign choice of `Dz` spans an affine set `{σᵀD_S z = r, D_Z z = 0}`; the
/// projection is the feasible affine projection nearest to `β`.
fn face_enumeration(beta: &[f64], d: &DMatrix<f64>, r: f64) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    if (d * &b).abs().sum() <= r {
        return beta.to_vec();
    }
    let (m, p) = d.shape();
    let mut best: Option<(f64, DVector<f64>)> = None;
    // each row is zero, positive or negative: base-3 digits
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0u8; m];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        if state.iter().all(|&s| s == 0) {
            continue;
        }
        let zeros: Vec<usize> = (0..m).filter(|&k| state[k] == 0).collect();
        let mut a = DMatrix::zeros(1 + zeros.len(), p);
        for k in 0..m {
            let sg = match state[k] {
                1 => 1.0,
                2 => -1.0,
                _ => continue,
            };
            for j in 0..p {
                a[(0, j)] += sg * d[(k, j)];
            }
        }
        for (row, &k) in zeros.iter().enumerate() {
            a.row_mut(row + 1).copy_from(&d.row(k));
        }
        let mut rhs = DVector::zeros(a.nrows());
        rhs[0] = r;
        let Ok(corr) = a.clone().svd(true, true).solve(&(rhs - &a * &b), 1e-12) else { continue };
        let z = &b + corr;
        if (d * &z).abs().sum() > r * (1.0 + 1e-10) || (&a * &z - DVector::from_fn(a.nrows(), |i, _| if i == 0 { r } else { 0.0 })).amax() > 1e-9 {
            continue;
        }
        let dist = (&z - &b).norm();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, z));
        }
    }
    best.expect("the ball has at least one feasible face").1.iter().copied().collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn vector_and_fraction() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-5.0..5.0f64, 2..8), 0.05..1.5f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn vector_projection_matches_kkt_bisection((beta, frac) in vector_and_fraction()) {
        let r = frac * beta.iter().map(|b| b.abs()).sum::<f64>().max(1e-3);
        let got = project_l1_ball(&beta, r).unwrap();
        prop_assert!(sup(&got.theta, &kkt_bisection(&beta, r)) < 1e-10);
        prop_assert!(got.theta.iter().map(|t| t.abs()).sum::<f64>() <= r * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_idempotent((beta, frac) in vector_and_fraction()) {
        let r = frac * beta.iter().map(|b| b.abs()).sum::<f64>().max(1e-3);
        let once = project_l1_ball(&beta, r).unwrap().theta;
        let twice = project_l1_ball(&once, r).unwrap().theta;
        prop_assert!(sup(&once, &twice) < 1e-12);
    }

    #[test]
    fn boundary_zeros_are_literal((beta, frac) in vector_and_fraction()) {
        let norm = beta.iter().map(|b| b.abs()).sum::<f64>();
        prop_assume!(norm > 1e-3 && frac < 1.0);
        let got = project_l1_ball(&beta, frac * norm).unwrap();
        let tau = got.threshold();
        for (t, b) in got.theta.iter().zip(&beta) {
            if b.abs() <= tau {
                prop_assert_eq!(*t, 0.0);
            }
        }
    }

    #[test]
    fn augmented_transform_round_trips((beta, frac) in vector_and_fraction()) {
        let r = frac * beta.iter().map(|b| b.abs()).sum::<f64>().max(1e-3);
        let state = forward_transform(&beta, r).unwrap();
        let back = inverse_transform(&state, r).unwrap();
        prop_assert!(sup(&back, &beta) < 1e-9 * (1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()))));
    }

    #[test]
    fn linear_map_projection_matches_face_enumeration(
        p in 2usize..4,
        m in 2usize..5,
        entries in prop::collection::vec(-2.0..2.0f64, 16),
        beta in prop::collection::vec(-3.0..3.0f64, 4),
        frac in 0.1..0.9f64,
    ) {
        let d = DMatrix::from_fn(m, p, |i, j| entries[i * 4 + j]);
        let beta = &beta[..p];
        let norm = (&d * DVector::from_column_slice(beta)).abs().sum();
        prop_assume!(norm > 1e-2);
        let r = frac * norm;
        let oracle = face_enumeration(beta, &d, r);
        let ball = GeneralizedBall::LinearMap { d: d.clone(), radius: r };
        let got = admm_project(beta, &ball, 1.0, 1e-11, 200_000).unwrap();
        prop_assert!(sup(&got.z, &oracle) < 1e-6, "admm {:?} oracle {:?}", got.z, oracle);
        prop_assert!(got.norm <= r * (1.0 + 1e-9));
    }

    #[test]
    fn nuclear_projection_thresholds_the_spectrum(
        rows in 2usize..5,
        cols in 2usize..5,
        entries in prop::collection::vec(-3.0..3.0f64, 16),
        frac in 0.05..1.2f64,
    ) {
        let b = DMatrix::from_fn(rows, cols, |i, j| entries[i * 4 + j]);
        let sigma: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();
        let r = frac * sigma.iter().sum::<f64>().max(1e-3);
        let out = nuclear_project(&b, r).unwrap();
        let mut got: Vec<f64> = out.l.clone().svd(false, false).singular_values.iter().copied().collect();
        let mut want = project_l1_ball(&sigma, r).unwrap().theta;
        got.sort_by(|a, b| b.total_cmp(a));
        want.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(sup(&got, &want) < 1e-8);
        prop_assert!(got.iter().sum::<f64>() <= r * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn identity_map_agrees_with_the_vector_ball() {
    let beta = [3.0, -1.0, 0.5, -2.5];
    let ball = GeneralizedBall::LinearMap { d: DMatrix::identity(4, 4), radius: 2.0 };
    let got = admm_project(&beta, &ball, 1.0, 1e-11, 50_000).unwrap();
    // τ = 1.25: (3 − τ) + (2.5 − τ) = 3 > 2, so τ solves 5.5 − 2τ = 2
    let want = [1.25, 0.0, 0.0, -0.75];
    assert!(sup(&got.z, &want) < 1e-9, "{:?}", got.z);
    assert_eq!(got.active_set, vec![0, 3]);
}
