//! Posterior summaries that keep exact sparsity: a sample-restricted Fréchet
//! mean, top-density credible regions, cardinality histograms and zero maps.
//!
//! Zero tests use literal equality; projected draws carry literal zeros.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleRecord;

/// The posterior draw closest, in total squared distance, to all others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetMean {
    pub index: usize,
    pub value: Vec<f64>,
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or_else(|| Error::Input("no samples".into()))?;
    let dim = first.len();
    if let Some(i) = points.iter().position(|x| x.len() != dim) {
        return Err(Error::Input(format!("sample {i} has length {}, expected {dim}", points[i].len())));
    }
    Ok(dim)
}

/// `argmin_j Σ_k ‖x_j − x_k‖²` over the given points, lowest index on ties.
///
/// Uses `Σ_k ‖x_j − x_k‖² = m‖x_j‖² − 2x_j·Σx_k + Σ‖x_k‖²`, dropping the
/// constant last term.
pub fn frechet_mean(points: &[Vec<f64>]) -> Result<FrechetMean> {
    let dim = check_points(points)?;
    let m = points.len() as f64;
    let mut total = vec![0.0; dim];
    for x in points {
        for (t, v) in total.iter_mut().zip(x) {
            *t += v;
        }
    }
    let mut best = (0, f64::INFINITY);
    for (j, x) in points.iter().enumerate() {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let dot: f64 = x.iter().zip(&total).map(|(a, b)| a * b).sum();
        let score = m * sq - 2.0 * dot;
        if score < best.1 {
            best = (j, score);
        }
    }
    Ok(FrechetMean { index: best.0, value: points[best.0].clone() })
}

/// Membership in the top `(1 − α)` posterior-density region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRegion {
    /// The empirical `α`-quantile of the log kernels.
    pub kappa: f64,
    pub flags: Vec<bool>,
}

impl DensityRegion {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Flags draws whose log kernel is at least `κ_α`, the value at 0-based
/// position `⌊mα⌋` of the ascending log kernels.
pub fn top_density_region(log_kernels: &[f64], alpha: f64) -> Result<DensityRegion> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if log_kernels.is_empty() {
        return Err(Error::Input("no samples".into()));
    }
    if log_kernels.iter().any(|x| x.is_nan()) {
        return Err(Error::Input("log kernels contain NaN".into()));
    }
    let mut sorted = log_kernels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let pos = ((m as f64 * alpha).floor() as usize).min(m - 1);
    let kappa = sorted[pos];
    Ok(DensityRegion { kappa, flags: log_kernels.iter().map(|&x| x >= kappa).collect() })
}

/// Empirical pmf of the given counts over `0..=max`.
pub fn cardinality_posterior(counts: &[usize], max: usize) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::Input("no samples".into()));
    }
    let mut pmf = vec![0.0; max + 1];
    for &c in counts {
        if c > max {
            return Err(Error::Input(format!("count {c} exceeds the support 0..={max}")));
        }
        pmf[c] += 1.0;
    }
    let m = counts.len() as f64;
    pmf.iter_mut().for_each(|v| *v /= m);
    Ok(pmf)
}

/// Per-coordinate frequency of `θ_i = 0`.
pub fn zero_probability_map(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = check_points(points)?;
    let mut zeros = vec![0usize; dim];
    for x in points {
        for (z, v) in zeros.iter_mut().zip(x) {
            if *v == 0.0 {
                *z += 1;
            }
        }
    }
    let m = points.len() as f64;
    Ok(zeros.into_iter().map(|z| z as f64 / m).collect())
}

/// Cardinality of a record: the model's `cardinality` extra when present,
/// otherwise the number of non-zero entries of `θ`.
pub fn record_cardinality(record: &SampleRecord) -> usize {
    match record.extras.get("cardinality") {
        Some(&c) => c as usize,
        None => record.theta.iter().filter(|&&t| t != 0.0).count(),
    }
}

/// The summary document written for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_samples: usize,
    pub frechet_mean: Vec<f64>,
    pub frechet_index: usize,
    pub alpha: f64,
    pub kappa_alpha: f64,
    pub n_in_region: usize,
    pub cardinality_pmf: Vec<f64>,
    pub zero_prob_map: Vec<f64>,
    /// Free-form sampler diagnostics attached by the caller.
    pub diagnostics: serde_json::Value,
}

/// Summarizes `θ` over the pooled records; `max_cardinality` bounds the pmf support.
pub fn summarize(records: &[SampleRecord], alpha: f64, max_cardinality: usize) -> Result<PosteriorSummary> {
    let thetas: Vec<Vec<f64>> = records.iter().map(|r| r.theta.clone()).collect();
    let fm = frechet_mean(&thetas)?;
    let kernels: Vec<f64> = records.iter().map(|r| r.log_posterior).collect();
    let region = top_density_region(&kernels, alpha)?;
    let counts: Vec<usize> = records.iter().map(record_cardinality).collect();
    let max = counts.iter().copied().max().unwrap_or(0).max(max_cardinality);
    Ok(PosteriorSummary {
        n_samples: records.len(),
        frechet_mean: fm.value,
        frechet_index: fm.index,
        alpha,
        kappa_alpha: region.kappa,
        n_in_region: region.n_flagged(),
        cardinality_pmf: cardinality_posterior(&counts, max)?,
        zero_prob_map: zero_probability_map(&thetas)?,
        diagnostics: serde_json::Value::Null,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_is_its_own_mean() {
        let fm = frechet_mean(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(fm.index, 0);
    }

    #[test]
    fn identical_samples_pick_first() {
        let pts = vec![vec![0.5, 0.0, -1.0]; 4];
        assert_eq!(frechet_mean(&pts).unwrap().index, 0);
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(frechet_mean(&[]), Err(Error::Input(_))));
        assert!(matches!(cardinality_posterior(&[], 3), Err(Error::Input(_))));
    }

    #[test]
    fn hundred_draws_flag_ninety_five() {
        let lk: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let reg = top_density_region(&lk, 0.05).unwrap();
        assert_eq!(reg.n_flagged(), 95);
        assert!(matches!(top_density_region(&lk, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_map_counts_literal_zeros() {
        let pts = vec![vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 1e-300]];
        assert_eq!(zero_probability_map(&pts).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn point_mass_cardinality() {
        assert_eq!(cardinality_posterior(&[3, 3, 3], 4).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
