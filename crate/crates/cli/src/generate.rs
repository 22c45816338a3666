//! Seeded synthetic data with ground truth.

use l1ball::models::GridData;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ModelName;
use crate::data::Dataset;
use crate::{CliError, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// iid `N(0, 1)` entries.
    #[default]
    Iid,
    /// Rows `N(0, Σ)` with `Σ_jk = ρ^{|j−k|}`.
    Ar,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}

fn five() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `y = Xθ⁰ + ε` with `c0` coefficients equal to `signal` at random positions.
    Regression {
        n: usize,
        p: usize,
        c0: usize,
        signal: f64,
        #[serde(default)]
        design: Design,
        #[serde(default = "half")]
        rho: f64,
        #[serde(default = "one")]
        noise_sd: f64,
        seed: u64,
    },
    /// Draws from `Σ_k w_k N(μ_k, σ²_k)`.
    Mixture { n: usize, weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>, seed: u64 },
    /// Left half of the grid at `low`, right half at `high`, plus noise.
    Fused {
        rows: usize,
        cols: usize,
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
        #[serde(default = "tenth")]
        noise_sd: f64,
        seed: u64,
    },
    /// Rank-`rank` Gaussian background plus `spikes` pixels of height
    /// `spike` per frame, plus noise.
    Lowrank {
        frames: usize,
        rows: usize,
        cols: usize,
        rank: usize,
        spikes: usize,
        #[serde(default = "five")]
        spike: f64,
        #[serde(default = "tenth")]
        noise_sd: f64,
        seed: u64,
    },
    /// Two equal communities; factor `k` loads `loading` on every node of
    /// community `k mod 2`; `A = Σ θ_k θ_kᵀ + E` with symmetric noise `E`.
    Structured {
        p: usize,
        factors: usize,
        #[serde(default = "one")]
        loading: f64,
        #[serde(default = "tenth")]
        noise_sd: f64,
        seed: u64,
    },
}

/// Ground truth written next to generated data as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub schema_version: u32,
    pub model: ModelName,
    /// True value of the model's `cardinality` functional: support size,
    /// changed edges, component count, rank or active factors.
    pub cardinality: usize,
    /// True support in the space the model's selection metrics use:
    /// coefficients, block-boundary pixels, sparse-frame pixels or co-loaded
    /// variable pairs.
    pub support: Option<Vec<bool>>,
    /// True parameter in the layout of a sample's `θ`.
    pub theta: Option<Vec<f64>>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(format!("generator: {}", msg.into()))
}

impl GeneratorSpec {
    pub fn model(&self) -> ModelName {
        match self {
            Self::Regression { .. } => ModelName::Regression,
            Self::Mixture { .. } => ModelName::Mixture,
            Self::Fused { .. } => ModelName::Fused,
            Self::Lowrank { .. } => ModelName::Lowrank,
            Self::Structured { .. } => ModelName::Structured,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            Self::Regression { seed, .. }
            | Self::Mixture { seed, .. }
            | Self::Fused { seed, .. }
            | Self::Lowrank { seed, .. }
            | Self::Structured { seed, .. } => seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Regression { n, p, c0, signal, rho, noise_sd, .. } => {
                if *n == 0 || *p == 0 || c0 > p {
                    return Err(invalid(format!("need n, p ≥ 1 and c0 ≤ p, got n {n}, p {p}, c0 {c0}")));
                }
                if !signal.is_finite() || !(*noise_sd >= 0.0) || !(rho.abs() < 1.0) {
                    return Err(invalid("signal must be finite, noise_sd ≥ 0 and |rho| < 1"));
                }
            }
            Self::Mixture { n, weights, means, variances, .. } => {
                if *n == 0 || weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
                    return Err(invalid("need n ≥ 1 and equally long non-empty weights, means and variances"));
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("weights must be positive and sum to 1, got {weights:?}")));
                }
                if variances.iter().any(|v| !(*v > 0.0)) || means.iter().any(|m| !m.is_finite()) {
                    return Err(invalid("variances must be positive and means finite"));
                }
            }
            Self::Fused { rows, cols, low, high, noise_sd, .. } => {
                if *rows < 2 || *cols < 2 {
                    return Err(invalid(format!("grid must be at least 2×2, got {rows}×{cols}")));
                }
                if !low.is_finite() || !high.is_finite() || !(*noise_sd >= 0.0) {
                    return Err(invalid("levels must be finite and noise_sd ≥ 0"));
                }
            }
            Self::Lowrank { frames, rows, cols, rank, spikes, spike, noise_sd, .. } => {
                let mn = rows * cols;
                if *frames == 0 || mn == 0 || *rank > (*frames).min(mn) || spikes > &mn {
                    return Err(invalid(format!(
                        "need frames, rows, cols ≥ 1, rank ≤ min(T, mn) and spikes ≤ mn, got T {frames}, {rows}×{cols}, rank {rank}, spikes {spikes}"
                    )));
                }
                if !spike.is_finite() || !(*noise_sd >= 0.0) {
                    return Err(invalid("spike must be finite and noise_sd ≥ 0"));
                }
            }
            Self::Structured { p, factors, loading, noise_sd, .. } => {
                if *p < 4 || *factors == 0 {
                    return Err(invalid(format!("need p ≥ 4 and factors ≥ 1, got p {p}, factors {factors}")));
                }
                if !loading.is_finite() || !(*noise_sd >= 0.0) {
                    return Err(invalid("loading must be finite and noise_sd ≥ 0"));
                }
            }
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Simulates data and its ground truth; the output is a pure function of `spec`.
pub fn generate_synthetic(spec: &GeneratorSpec) -> Result<(Dataset, Truth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed());
    let truth = |cardinality, support, theta| Truth {
        schema_version: SCHEMA_VERSION,
        model: spec.model(),
        cardinality,
        support,
        theta,
    };
    Ok(match *spec {
        GeneratorSpec::Regression { n, p, c0, signal, design, rho, noise_sd, .. } => {
            let x = match design {
                Design::Iid => DMatrix::from_fn(n, p, |_, _| normal(&mut rng)),
                Design::Ar => {
                    let mut x = DMatrix::zeros(n, p);
                    let innovation = (1.0 - rho * rho).sqrt();
                    for i in 0..n {
                        x[(i, 0)] = normal(&mut rng);
                        for j in 1..p {
                            x[(i, j)] = rho * x[(i, j - 1)] + innovation * normal(&mut rng);
                        }
                    }
                    x
                }
            };
            let mut support: Vec<usize> = sample(&mut rng, p, c0).into_vec();
            support.sort_unstable();
            let mut theta = vec![0.0; p];
            for &j in &support {
                theta[j] = signal;
            }
            let noise = DVector::from_fn(n, |_, _| noise_sd * normal(&mut rng));
            let y = &x * DVector::from_column_slice(&theta) + noise;
            let mask = theta.iter().map(|t| *t != 0.0).collect();
            (Dataset::Regression { x, y }, truth(c0, Some(mask), Some(theta)))
        }
        GeneratorSpec::Mixture { n, ref weights, ref means, ref variances, .. } => {
            let y = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let k = weights.iter().position(|w| {
                        acc += w;
                        u < acc
                    });
                    let k = k.unwrap_or(weights.len() - 1);
                    means[k] + variances[k].sqrt() * normal(&mut rng)
                })
                .collect();
            (Dataset::Mixture { y }, truth(weights.len(), None, None))
        }
        GeneratorSpec::Fused { rows, cols, low, high, noise_sd, .. } => {
            let clean = DMatrix::from_fn(rows, cols, |_, j| if 2 * j < cols { low } else { high });
            let pixels = DMatrix::from_fn(rows, cols, |i, j| clean[(i, j)] + noise_sd * normal(&mut rng));
            let theta: Vec<f64> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|ij| clean[ij]).collect();
            let grid = GridData::new(clean)?;
            let changed = grid.edges().into_iter().filter(|&(a, b)| theta[a] != theta[b]).count();
            let boundary = grid.neighbor_change(&theta);
            (Dataset::Fused { pixels }, truth(changed, Some(boundary), Some(theta)))
        }
        GeneratorSpec::Lowrank { frames, rows, cols, rank, spikes, spike, noise_sd, .. } => {
            let mn = rows * cols;
            let u = DMatrix::from_fn(frames, rank, |_, _| normal(&mut rng));
            let v = DMatrix::from_fn(rank, mn, |_, _| normal(&mut rng));
            let background = &u * &v;
            let mut sparse = DMatrix::zeros(frames, mn);
            for t in 0..frames {
                for j in sample(&mut rng, mn, spikes).into_iter() {
                    sparse[(t, j)] = spike;
                }
            }
            let observed = DMatrix::from_fn(frames, mn, |t, j| background[(t, j)] + sparse[(t, j)] + noise_sd * normal(&mut rng));
            let row_major = |m: &DMatrix<f64>| (0..frames).flat_map(|t| (0..mn).map(move |j| (t, j))).map(|tj| m[tj]).collect::<Vec<_>>();
            let s = row_major(&sparse);
            let mask = s.iter().map(|v| *v != 0.0).collect();
            let mut theta = row_major(&background);
            theta.extend(s);
            (Dataset::Lowrank { frames: observed, rows, cols }, truth(rank, Some(mask), Some(theta)))
        }
        GeneratorSpec::Structured { p, factors, loading, noise_sd, .. } => {
            let community = |i: usize| usize::from(2 * i >= p);
            let s = DMatrix::from_fn(p, p, |i, j| if community(i) == community(j) { 1.0 } else { 0.0 });
            let mut theta = vec![0.0; factors * p];
            for k in 0..factors {
                for i in (0..p).filter(|&i| community(i) == k % 2) {
                    theta[k * p + i] = loading;
                }
            }
            let mut a = DMatrix::zeros(p, p);
            for k in 0..factors {
                let f = DVector::from_column_slice(&theta[k * p..(k + 1) * p]);
                a += &f * f.transpose();
            }
            for i in 0..p {
                for j in i..p {
                    let e = noise_sd * normal(&mut rng);
                    a[(i, j)] += e;
                    if j != i {
                        a[(j, i)] += e;
                    }
                }
            }
            let pairs = co_loading_pairs(&theta, p);
            (Dataset::Structured { a, s }, truth(factors, Some(pairs), Some(theta)))
        }
    })
}

/// For loadings stored factor by factor (`θ[k·p + i]`), whether each pair
/// `i < j` (in row-major upper-triangle order) shares a factor loading both.
pub fn co_loading_pairs(theta: &[f64], p: usize) -> Vec<bool> {
    let factors = theta.len() / p;
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            out.push((0..factors).any(|k| theta[k * p + i] != 0.0 && theta[k * p + j] != 0.0));
        }
    }
    out
}
