//! Experiment plumbing for the `l1ball` binary: declarative configs,
//! synthetic data generators, data files, result bundles and support-recovery
//! metrics.
//!
//! A run reads an [`ExperimentConfig`], generates or loads its data, builds
//! the named model, samples it with NUTS and writes a [`ResultBundle`]
//! directory:
//!
//! ```text
//! <output_dir>/
//!   samples_chain0.csv …   one row per retained draw
//!   summary.json           Fréchet mean, credible region, cardinality pmf, zero map
//!   diagnostics.json       per-chain sampler health
//!   metrics.csv            support recovery against the generator's truth, runtime
//!   data/                  the data the run used, plus truth.json when generated
//! ```
//!
//! Everything except the `runtime_seconds` row of `metrics.csv` is a pure
//! function of the config.

pub mod config;
pub mod data;
pub mod generate;
pub mod metrics;
pub mod run;

use std::path::PathBuf;

pub use config::ExperimentConfig;
pub use data::Dataset;
pub use generate::{generate_synthetic, GeneratorSpec, Truth};
pub use metrics::{compute_selection_metrics, SelectionMetrics};
pub use run::{run_experiment, ResultBundle};

/// Version stamped into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable bounding the chain worker pool.
pub const THREADS_ENV: &str = "L1BALL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// Data files that are missing, malformed or inconsistent with the model.
    #[error("data error: {0}")]
    Data(String),

    /// Chains finished but failed the configured health thresholds.
    #[error("diagnostics failure: {0}")]
    Diagnostics(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] l1ball::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    /// Process exit status: 2 for configuration errors, 3 for diagnostics
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(l1ball::Error::Config(_)) => 2,
            Self::Diagnostics(_) | Self::Core(l1ball::Error::Diagnostics(_)) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
