use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, ensure_radius, Error, Result};

use super::vector::project_l1_ball;

/// Result of projecting a matrix onto a nuclear-norm ball.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearProjection {
    pub l: DMatrix<f64>,
    /// Singular values of `l`, descending; trailing entries are literal zeros.
    pub singular_values: Vec<f64>,
    /// Singular values of the input, descending.
    pub input_singular_values: Vec<f64>,
    pub boundary: bool,
    /// Number of non-zero singular values of `l`.
    pub rank: usize,
}

/// `argmin_{‖Z‖_* ≤ r} ‖Z − B‖_F` via singular-value soft-thresholding.
pub fn nuclear_project(b: &DMatrix<f64>, r: f64) -> Result<NuclearProjection> {
    ensure_finite(b.as_slice(), "B")?;
    ensure_radius(r)?;
    let svd = nalgebra::SVD::try_new(b.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let proj = project_l1_ball(&sigma, r)?;
    if !proj.boundary {
        return Ok(NuclearProjection {
            l: b.clone(),
            rank: sigma.iter().filter(|&&s| s != 0.0).count(),
            singular_values: sigma.clone(),
            input_singular_values: sigma,
            boundary: false,
        });
    }

    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD returned no Vᵀ".into()))?;
    let mut l = DMatrix::<f64>::zeros(b.nrows(), b.ncols());
    for (k, &i) in order.iter().enumerate() {
        let s = proj.theta[k];
        if s != 0.0 {
            let col: DVector<f64> = u.column(i).into_owned();
            l += col * v_t.row(i) * s;
        }
    }
    Ok(NuclearProjection {
        l,
        rank: proj.cardinality(),
        singular_values: proj.theta,
        input_singular_values: sigma,
        boundary: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_scales() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = &u * v.transpose() * 5.0;
        let res = nuclear_project(&b, 2.0).unwrap();
        let expect = &b * 0.4;
        assert!((res.l - expect).amax() < 1e-12);
        assert_eq!(res.rank, 1);
    }

    #[test]
    fn interior_returns_input() {
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        let res = nuclear_project(&b, 1.0).unwrap();
        assert_eq!(res.l, b);
        assert!(!res.boundary);
    }

    #[test]
    fn diagonal_matches_vector_projection() {
        let b = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5]);
        let res = nuclear_project(&b, 2.0).unwrap();
        let v = project_l1_ball(&[3.0, -1.0, 0.5], 2.0).unwrap();
        for i in 0..3 {
            assert!((res.l[(i, i)] - v.theta[i]).abs() < 1e-12);
        }
        assert!((res.singular_values.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}
