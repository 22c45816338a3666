use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use l1ball::models::{
    FusedModel, GridData, InverseGamma, LowRankSparseData, LowRankSparseModel, MixtureData, MixtureModel, NoisePrior,
    PriorOnlyModel, RadiusModel, RegressionData, RegressionModel, StructuredData, StructuredModel,
};
use l1ball::parallel::with_threads;
use l1ball::priors::{theory_lambda_alpha, BaseDistribution, RadiusPrior, TheoryHyperparams};
use l1ball::sampler::{run_chains, ChainOutput, Model, NutsConfig, SampleRecord};
use l1ball::stats::lower_order_statistic;
use l1ball::summaries::{summarize, PosteriorSummary};
use l1ball::Execution;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{BaseConfig, ExperimentConfig, ModelName, NoiseConfig, RadiusConfig};
use crate::data::{read_json, write_json, Dataset, TRUTH_FILE};
use crate::generate::{co_loading_pairs, generate_synthetic, Truth};
use crate::metrics::{metric_rows, render_metrics_csv};
use crate::{CliError, Result, SCHEMA_VERSION, THREADS_ENV};

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub model: ModelName,
    #[serde(flatten)]
    pub posterior: PosteriorSummary,
    /// Support of the Fréchet mean in the model's selection space.
    pub selection_support: Vec<bool>,
    /// Most frequent value of the cardinality functional, smallest on ties.
    pub cardinality_mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub step_size: f64,
    pub warmup_divergences: usize,
    pub divergences: usize,
    pub divergence_rate: f64,
    pub max_depth_hits: usize,
    pub mean_accept_stat: f64,
    pub ebfmi: f64,
    pub tree_depth_counts: Vec<usize>,
}

/// Contents of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub schema_version: u32,
    pub passed: bool,
    pub failures: Vec<String>,
    pub chains: Vec<ChainDiagnostics>,
}

/// Everything a run wrote, as written.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub sample_files: Vec<PathBuf>,
    pub summary: RunSummary,
    pub diagnostics: Diagnostics,
    /// Rows of `metrics.csv`, or empty when no truth was available.
    pub metrics: Vec<(String, f64)>,
    pub truth: Option<Truth>,
    pub runtime_seconds: f64,
}

impl ResultBundle {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Worker count from `L1BALL_THREADS`; `None` leaves the pool at its default.
pub fn thread_override() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn base_distribution(base: &BaseConfig, dim: usize, lambda_override: Option<f64>) -> Result<BaseDistribution> {
    Ok(match *base {
        BaseConfig::Laplace { lambda } => BaseDistribution::iid_de(dim, lambda)?,
        BaseConfig::Cauchy { scale } => BaseDistribution::independent_cauchy(vec![scale; dim])?,
        BaseConfig::Gaussian { sd, rho } => {
            let cov = DMatrix::from_fn(dim, dim, |i, j| sd * sd * rho.powi((i as i32 - j as i32).abs()));
            BaseDistribution::gaussian(vec![0.0; dim], cov)?
        }
        BaseConfig::Theory { .. } => {
            let lambda = lambda_override.ok_or_else(|| CliError::Config("theory base needs a design matrix".into()))?;
            BaseDistribution::iid_de(dim, lambda)?
        }
    })
}

fn radius_model(radius: &RadiusConfig, alpha_override: Option<f64>) -> Result<RadiusModel> {
    Ok(match *radius {
        RadiusConfig::Fixed { r } => RadiusModel::Fixed(r),
        RadiusConfig::Exponential { alpha } => RadiusModel::Random(RadiusPrior::Exponential { alpha }),
        RadiusConfig::HalfCauchy { scale } => RadiusModel::Random(RadiusPrior::HalfCauchy { scale }),
        RadiusConfig::Quantile { a_w, b_w } => RadiusModel::Random(RadiusPrior::QuantileDependent { a_w, b_w }),
        RadiusConfig::Theory => {
            let alpha = alpha_override.ok_or_else(|| CliError::Config("theory radius needs a theory base".into()))?;
            RadiusModel::Random(RadiusPrior::Exponential { alpha })
        }
    })
}

fn inverse_gamma(noise: &NoiseConfig) -> InverseGamma {
    match *noise {
        NoiseConfig::InverseGamma { shape, rate } => InverseGamma { shape, rate },
        NoiseConfig::Known { .. } => InverseGamma::default(),
    }
}

/// A model ready for sampling, with the bound on its cardinality functional.
pub struct BuiltModel {
    pub model: Box<dyn Model>,
    pub max_cardinality: usize,
}

pub fn build_model(config: &ExperimentConfig, data: Option<&Dataset>) -> Result<BuiltModel> {
    let prior = &config.prior;
    let base = || prior.base.as_ref().ok_or_else(|| CliError::Config(format!("{}: prior.base is required", config.model)));
    let mismatch = || CliError::Data(format!("data does not match model {}", config.model));
    let (model, max_cardinality): (Box<dyn Model>, usize) = match (config.model, data) {
        (ModelName::Prior, _) => {
            let dim = prior.dim.unwrap_or(0);
            let m = PriorOnlyModel::new(base_distribution(base()?, dim, None)?, radius_model(&prior.radius, None)?)?;
            (Box::new(m), dim)
        }
        (ModelName::Regression, Some(Dataset::Regression { x, y })) => {
            let p = x.ncols();
            let (lambda, alpha) = match base()? {
                BaseConfig::Theory { b1, b2, b3 } => {
                    let x_col_norm = (0..p).map(|j| x.column(j).norm()).fold(0.0, f64::max);
                    let s = theory_lambda_alpha(p, &TheoryHyperparams { b1: *b1, b2: *b2, b3: *b3, x_col_norm })
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    (Some(s.lambda), Some(s.alpha))
                }
                _ => (None, None),
            };
            let noise = match prior.noise {
                NoiseConfig::Known { sigma2 } => NoisePrior::Known(sigma2),
                ref ig => NoisePrior::InverseGamma(inverse_gamma(ig)),
            };
            let data = RegressionData::new(x.clone(), y.clone(), noise)?;
            let m = RegressionModel::new(data, base_distribution(base()?, p, lambda)?, radius_model(&prior.radius, alpha)?)?;
            (Box::new(m), p)
        }
        (ModelName::Fused, Some(Dataset::Fused { pixels })) => {
            let grid = GridData::new(pixels.clone())?;
            let edges = grid.n_edges();
            let b = base_distribution(base()?, grid.n_pixels(), None)?;
            let m = FusedModel::new(grid, b, radius_model(&prior.radius, None)?, prior.mu_sd, inverse_gamma(&prior.noise))?;
            (Box::new(m), edges)
        }
        (ModelName::Mixture, Some(Dataset::Mixture { y })) => {
            let k1 = prior.components.unwrap_or(0);
            let data = MixtureData::new(y.clone(), k1, prior.mu_sd, inverse_gamma(&prior.noise))?;
            let m = MixtureModel::new(data, base_distribution(base()?, k1, None)?, radius_model(&prior.radius, None)?)?;
            (Box::new(m), k1)
        }
        (ModelName::Lowrank, Some(Dataset::Lowrank { frames, rows, cols })) => {
            let data = LowRankSparseData::new(frames.clone(), *rows, *cols)?;
            let size = frames.nrows() * frames.ncols();
            let sparse_base = prior.sparse_base.as_ref().unwrap_or(base()?);
            let sparse_radius = prior.sparse_radius.as_ref().ok_or_else(|| CliError::Config("lowrank: prior.sparse_radius is required".into()))?;
            let m = LowRankSparseModel::new(
                data,
                base_distribution(base()?, size, None)?,
                base_distribution(sparse_base, size, None)?,
                radius_model(&prior.radius, None)?,
                radius_model(sparse_radius, None)?,
                inverse_gamma(&prior.noise),
            )?;
            (Box::new(m), frames.nrows().min(frames.ncols()))
        }
        (ModelName::Structured, Some(Dataset::Structured { a, s })) => {
            let d = prior.n_factors.unwrap_or(0);
            let data = StructuredData::new(a.clone(), s.clone(), d, prior.kappa)?;
            let factor_radius = prior.factor_radius.as_ref().ok_or_else(|| CliError::Config("structured: prior.factor_radius is required".into()))?;
            let m = StructuredModel::new(data, radius_model(&prior.radius, None)?, radius_model(factor_radius, None)?, inverse_gamma(&prior.noise))?;
            (Box::new(m), d)
        }
        _ => return Err(mismatch()),
    };
    Ok(BuiltModel { model, max_cardinality })
}

/// The Fréchet-mean support in the space [`Truth::support`] uses.
pub fn selection_support(model: ModelName, theta: &[f64], data: Option<&Dataset>) -> Result<Vec<bool>> {
    Ok(match (model, data) {
        (ModelName::Fused, Some(Dataset::Fused { pixels })) => GridData::new(pixels.clone())?.neighbor_change(theta),
        (ModelName::Lowrank, Some(Dataset::Lowrank { frames, .. })) => {
            let size = frames.nrows() * frames.ncols();
            theta[size.min(theta.len())..].iter().map(|t| *t != 0.0).collect()
        }
        (ModelName::Structured, Some(Dataset::Structured { a, .. })) => co_loading_pairs(theta, a.nrows()),
        _ => theta.iter().map(|t| *t != 0.0).collect(),
    })
}

fn mode(pmf: &[f64]) -> usize {
    pmf.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best }).0
}

/// Fraction of true `θ_j` inside the central 95% marginal interval of the draws.
fn coverage(records: &[SampleRecord], truth: &[f64]) -> Result<Option<f64>> {
    if records.is_empty() || records[0].theta.len() != truth.len() {
        return Ok(None);
    }
    let mut covered = 0usize;
    let mut column = vec![0.0; records.len()];
    for (j, &t) in truth.iter().enumerate() {
        for (c, r) in column.iter_mut().zip(records) {
            *c = r.theta[j];
        }
        let lo = lower_order_statistic(&column, 0.025)?;
        let hi = lower_order_statistic(&column, 0.975)?;
        covered += usize::from(lo <= t && t <= hi);
    }
    Ok(Some(covered as f64 / truth.len() as f64))
}

fn chain_diagnostics(chain: &ChainOutput) -> ChainDiagnostics {
    let n = chain.records.len().max(1) as f64;
    ChainDiagnostics {
        chain: chain.chain_id,
        step_size: chain.step_size,
        warmup_divergences: chain.warmup_divergences,
        divergences: chain.divergences,
        divergence_rate: chain.divergences as f64 / n,
        max_depth_hits: chain.max_depth_hits,
        mean_accept_stat: chain.mean_accept_stat,
        ebfmi: chain.ebfmi,
        tree_depth_counts: chain.tree_depth_counts.clone(),
    }
}

fn assess(config: &ExperimentConfig, chains: &[ChainOutput]) -> Diagnostics {
    let s = &config.sampler;
    let chains: Vec<ChainDiagnostics> = chains.iter().map(chain_diagnostics).collect();
    let mut failures = Vec::new();
    for c in &chains {
        if c.divergence_rate > s.max_divergence_rate {
            failures.push(format!("chain {}: divergence rate {:.3} exceeds {}", c.chain, c.divergence_rate, s.max_divergence_rate));
        }
        if c.ebfmi.is_finite() && c.ebfmi < s.min_ebfmi {
            failures.push(format!("chain {}: E-BFMI {:.3} below {}", c.chain, c.ebfmi, s.min_ebfmi));
        }
    }
    Diagnostics { schema_version: SCHEMA_VERSION, passed: failures.is_empty(), failures, chains }
}

/// Writes one chain's draws: bookkeeping columns, then extras in key order,
/// then `theta_1 … theta_k`.
pub fn write_samples(path: &Path, chain: &ChainOutput) -> Result<()> {
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let keys: Vec<String> = chain.records.first().map(|r| r.extras.keys().cloned().collect()).unwrap_or_default();
    let dim = chain.records.first().map_or(0, |r| r.theta.len());
    let mut header: Vec<String> =
        ["draw", "log_posterior", "accept_stat", "tree_depth", "n_leapfrog", "divergent", "energy", "r"].map(String::from).to_vec();
    header.extend(keys.iter().cloned());
    header.extend((1..=dim).map(|j| format!("theta_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in chain.records.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            format!("{:?}", r.log_posterior),
            format!("{:?}", r.accept_stat),
            r.tree_depth.to_string(),
            r.n_leapfrog.to_string(),
            u8::from(r.divergent).to_string(),
            format!("{:?}", r.energy),
            format!("{:?}", r.r),
        ];
        row.extend(keys.iter().map(|k| format!("{:?}", r.extras.get(k).copied().unwrap_or(f64::NAN))));
        row.extend(r.theta.iter().map(|t| format!("{t:?}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(path))
}

fn load_data(config: &ExperimentConfig, out: &Path) -> Result<(Option<Dataset>, Option<Truth>)> {
    let data_dir = out.join("data");
    match (&config.data.generator, &config.data.path) {
        (Some(spec), _) => {
            let (data, truth) = generate_synthetic(spec)?;
            data.write(&data_dir)?;
            write_json(&data_dir.join(TRUTH_FILE), &truth)?;
            Ok((Some(data), Some(truth)))
        }
        (None, Some(path)) => {
            let data = Dataset::read(path, config.model)?;
            let truth_path = path.join(TRUTH_FILE);
            let truth = if truth_path.is_file() { Some(read_json::<Truth>(&truth_path)?) } else { None };
            data.write(&data_dir)?;
            if let Some(t) = &truth {
                write_json(&data_dir.join(TRUTH_FILE), t)?;
            }
            Ok((Some(data), truth))
        }
        (None, None) => Ok((None, None)),
    }
}

/// Runs the configured experiment and writes its bundle to `config.output_dir`.
///
/// Sampler health is reported in [`Diagnostics::passed`], not as an error,
/// so the bundle is complete either way.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultBundle> {
    config.validate()?;
    let threads = thread_override()?;
    let started = Instant::now();
    let out = config.output_dir.clone();
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let (data, truth) = load_data(config, &out)?;
    let built = build_model(config, data.as_ref())?;
    let s = &config.sampler;
    let nuts = NutsConfig {
        n_warmup: s.warmup,
        n_samples: s.samples,
        seed: s.seed,
        target_accept: s.target_accept,
        max_depth: s.max_depth,
        ..NutsConfig::default()
    };
    let chains = with_threads(threads, || run_chains(built.model.as_ref(), &nuts, s.chains, Execution::Parallel))?;

    let mut sample_files = Vec::with_capacity(chains.len());
    for chain in &chains {
        let path = out.join(format!("samples_chain{}.csv", chain.chain_id));
        write_samples(&path, chain)?;
        sample_files.push(path);
    }
    let records: Vec<SampleRecord> = chains.iter().flat_map(|c| c.records.iter().cloned()).collect();
    let diagnostics = assess(config, &chains);
    let mut posterior = summarize(&records, config.summary.alpha, built.max_cardinality)?;
    posterior.diagnostics = serde_json::json!({ "passed": diagnostics.passed, "failures": diagnostics.failures });
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        model: config.model,
        selection_support: selection_support(config.model, &posterior.frechet_mean, data.as_ref())?,
        cardinality_mode: mode(&posterior.cardinality_pmf),
        posterior,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("diagnostics.json"), &diagnostics)?;

    let runtime_seconds = started.elapsed().as_secs_f64();
    let mut metrics = Vec::new();
    if let Some(t) = &truth {
        let cov = match &t.theta {
            Some(theta) => coverage(&records, theta)?,
            None => None,
        };
        metrics = metric_rows(&summary, t, cov)?;
    }
    metrics.push(("runtime_seconds".into(), runtime_seconds));
    let metrics_path = out.join("metrics.csv");
    fs::write(&metrics_path, render_metrics_csv(&metrics)).map_err(CliError::io(&metrics_path))?;

    Ok(ResultBundle { dir: out, sample_files, summary, diagnostics, metrics, truth, runtime_seconds })
}

/// Reads `summary.json` from a bundle directory.
pub fn read_summary(bundle: &Path) -> Result<RunSummary> {
    read_json(&bundle.join("summary.json"))
}
