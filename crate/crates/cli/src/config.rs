use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::generate::GeneratorSpec;
use crate::{CliError, Result};

/// One experiment, read from a TOML file.
///
/// ```toml
/// model = "regression"
/// output_dir = "out/regression_small"
///
/// [data.generator]
/// kind = "regression"
/// n = 50
/// p = 100
/// c0 = 5
/// signal = 5.0
/// seed = 7
///
/// [prior]
/// base = { kind = "laplace", lambda = 5.0 }
/// radius = { kind = "exponential", alpha = 20.0 }
///
/// [sampler]
/// chains = 2
/// warmup = 500
/// samples = 500
/// seed = 11
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub summary: SummaryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Regression,
    Prior,
    Fused,
    Mixture,
    Lowrank,
    Structured,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Regression => "regression",
            Self::Prior => "prior",
            Self::Fused => "fused",
            Self::Mixture => "mixture",
            Self::Lowrank => "lowrank",
            Self::Structured => "structured",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the data comes from: a directory of data files or a generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// Base distribution of `β`; the structured model derives its own.
    pub base: Option<BaseConfig>,
    pub radius: RadiusConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Dimension of the prior-only model.
    pub dim: Option<usize>,
    /// Prior standard deviation of the fused offset and the mixture means.
    #[serde(default = "default_mu_sd")]
    pub mu_sd: f64,
    /// Upper bound `K1` on mixture components.
    pub components: Option<usize>,
    /// Base and radius of the sparse frames in the low-rank model.
    pub sparse_base: Option<BaseConfig>,
    pub sparse_radius: Option<RadiusConfig>,
    /// Radius of the factor-scale ball in the structured model.
    pub factor_radius: Option<RadiusConfig>,
    pub n_factors: Option<usize>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_mu_sd() -> f64 {
    10.0
}

fn default_kappa() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseConfig {
    /// iid `DE(0, λ)`.
    Laplace { lambda: f64 },
    /// iid Cauchy with the given scale.
    Cauchy { scale: f64 },
    /// Zero-mean Gaussian with covariance `sd²·ρ^{|i−j|}`.
    Gaussian {
        sd: f64,
        #[serde(default)]
        rho: f64,
    },
    /// iid `DE(0, λ)` with `λ = b1·p^b2/‖X‖` (regression only).
    Theory { b1: f64, b2: f64, b3: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusConfig {
    Fixed { r: f64 },
    Exponential { alpha: f64 },
    HalfCauchy { scale: f64 },
    Quantile { a_w: f64, b_w: f64 },
    /// `r ∼ Exp(α)` with `α = p^b3/‖X‖` from a `theory` base.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    InverseGamma { shape: f64, rate: f64 },
    Known { sigma2: f64 },
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::InverseGamma { shape: 1.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_depth: usize,
    /// Post-warmup divergence fraction above which a chain fails.
    pub max_divergence_rate: f64,
    /// E-BFMI below which a chain fails.
    pub min_ebfmi: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            warmup: 1000,
            samples: 1000,
            seed: 1,
            target_accept: 0.8,
            max_depth: 10,
            max_divergence_rate: 0.1,
            min_ebfmi: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummaryConfig {
    /// Level of the top-density credible region.
    pub alpha: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_base(base: &BaseConfig, model: ModelName) -> Result<()> {
    match *base {
        BaseConfig::Laplace { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
            Err(bad(format!("laplace lambda must be positive, got {lambda}")))
        }
        BaseConfig::Cauchy { scale } if !(scale > 0.0 && scale.is_finite()) => {
            Err(bad(format!("cauchy scale must be positive, got {scale}")))
        }
        BaseConfig::Gaussian { sd, rho } if !(sd > 0.0 && rho.abs() < 1.0) => {
            Err(bad(format!("gaussian base needs sd > 0 and |rho| < 1, got sd {sd}, rho {rho}")))
        }
        BaseConfig::Theory { .. } if model != ModelName::Regression => {
            Err(bad("the theory schedule needs a design matrix and is only available for regression"))
        }
        BaseConfig::Theory { b1, b2, b3 } => {
            if !(b1 > 0.0) {
                return Err(bad(format!("theory schedule requires b1 > 0, got {b1}")));
            }
            if !(b2 > b3) {
                return Err(bad(format!("theory schedule requires b2 > b3, got b2 = {b2}, b3 = {b3}")));
            }
            if !(b3 <= 1.0) {
                return Err(bad(format!("theory schedule requires b3 <= 1, got {b3}")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_radius(radius: &RadiusConfig, base: Option<&BaseConfig>, what: &str) -> Result<()> {
    let ok = match *radius {
        RadiusConfig::Fixed { r } => r > 0.0 && r.is_finite(),
        RadiusConfig::Exponential { alpha } => alpha > 0.0 && alpha.is_finite(),
        RadiusConfig::HalfCauchy { scale } => scale > 0.0 && scale.is_finite(),
        RadiusConfig::Quantile { a_w, b_w } => a_w > 0.0 && b_w > 0.0,
        RadiusConfig::Theory => {
            if !matches!(base, Some(BaseConfig::Theory { .. })) {
                return Err(bad(format!("{what}: a theory radius needs a theory base")));
            }
            true
        }
    };
    if ok {
        Ok(())
    } else {
        Err(bad(format!("{what}: radius parameters must be positive, got {radius:?}")))
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model;
        let prior = &self.prior;
        match (&self.data.path, &self.data.generator, model) {
            (None, None, ModelName::Prior) => {}
            (Some(_), Some(_), _) => return Err(bad("data: give either a path or a generator, not both")),
            (None, None, _) => return Err(bad(format!("data: model {model} needs a path or a generator"))),
            (_, Some(_), ModelName::Prior) | (Some(_), _, ModelName::Prior) => {
                return Err(bad("data: the prior model takes no data"))
            }
            (Some(path), None, _) if !path.is_dir() => {
                return Err(bad(format!("data path {} is not a directory", path.display())))
            }
            (_, Some(g), _) if g.model() != model => {
                return Err(bad(format!("generator produces {} data but the model is {model}", g.model())))
            }
            _ => {}
        }
        if let Some(g) = &self.data.generator {
            g.validate()?;
        }
        match (model, &prior.base) {
            (ModelName::Structured, Some(_)) => {
                return Err(bad("structured: the base covariance comes from S; remove prior.base"))
            }
            (ModelName::Structured, None) => {}
            (_, None) => return Err(bad(format!("{model}: prior.base is required"))),
            (_, Some(base)) => check_base(base, model)?,
        }
        check_radius(&prior.radius, prior.base.as_ref(), "prior.radius")?;
        match prior.noise {
            NoiseConfig::InverseGamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                return Err(bad(format!("noise: inverse-gamma shape and rate must be positive, got {shape}, {rate}")))
            }
            NoiseConfig::Known { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                return Err(bad(format!("noise: known sigma2 must be positive, got {sigma2}")))
            }
            NoiseConfig::Known { .. } if model != ModelName::Regression => {
                return Err(bad(format!("{model}: a known noise variance is only supported for regression")))
            }
            _ => {}
        }
        if !(prior.mu_sd > 0.0 && prior.mu_sd.is_finite()) {
            return Err(bad(format!("prior.mu_sd must be positive, got {}", prior.mu_sd)));
        }
        match model {
            ModelName::Prior if prior.dim.unwrap_or(0) == 0 => return Err(bad("prior: prior.dim must be at least 1")),
            ModelName::Mixture if prior.components.unwrap_or(0) < 2 => {
                return Err(bad("mixture: prior.components must be at least 2"))
            }
            ModelName::Lowrank => {
                let radius = prior.sparse_radius.as_ref().ok_or_else(|| bad("lowrank: prior.sparse_radius is required"))?;
                check_radius(radius, None, "prior.sparse_radius")?;
                if let Some(base) = &prior.sparse_base {
                    check_base(base, model)?;
                }
            }
            ModelName::Structured => {
                let radius = prior.factor_radius.as_ref().ok_or_else(|| bad("structured: prior.factor_radius is required"))?;
                check_radius(radius, None, "prior.factor_radius")?;
                if prior.n_factors.unwrap_or(0) == 0 {
                    return Err(bad("structured: prior.n_factors must be at least 1"));
                }
                if !(prior.kappa >= 0.0) {
                    return Err(bad(format!("structured: kappa must be non-negative, got {}", prior.kappa)));
                }
            }
            _ => {}
        }
        let s = &self.sampler;
        if s.chains == 0 || s.samples == 0 {
            return Err(bad("sampler: chains and samples must be at least 1"));
        }
        if !(s.target_accept > 0.0 && s.target_accept < 1.0) {
            return Err(bad(format!("sampler: target_accept must lie in (0, 1), got {}", s.target_accept)));
        }
        if s.max_depth == 0 {
            return Err(bad("sampler: max_depth must be at least 1"));
        }
        if !(0.0..=1.0).contains(&s.max_divergence_rate) {
            return Err(bad(format!("sampler: max_divergence_rate must lie in [0, 1], got {}", s.max_divergence_rate)));
        }
        if !(self.summary.alpha > 0.0 && self.summary.alpha < 1.0) {
            return Err(bad(format!("summary: alpha must lie in (0, 1), got {}", self.summary.alpha)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        model = "prior"
        output_dir = "out"
        [prior]
        dim = 4
        base = { kind = "laplace", lambda = 1.0 }
        radius = { kind = "fixed", r = 2.0 }
    "#;

    #[test]
    fn minimal_prior_config_parses() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.model, ModelName::Prior);
        assert_eq!(c.sampler, SamplerConfig::default());
        assert_eq!(c.prior.noise, NoiseConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("dim = 4", "dim = 4\nlambda = 3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn theory_base_outside_regression_is_rejected() {
        let text = MINIMAL.replace(r#"{ kind = "laplace", lambda = 1.0 }"#, r#"{ kind = "theory", b1 = 1.0, b2 = 1.0, b3 = 0.0 }"#);
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
