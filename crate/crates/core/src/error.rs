use thiserror::Error;

/// Errors raised by the projection, prior, sampler and model layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: non-finite values, empty vectors, dimension mismatches.
    #[error("invalid input: {0}")]
    Input(String),

    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input sits on (or within finite-difference reach of) a
    /// measure-zero set where the requested derivative is not defined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations (primal residual {primal:.3e}, dual residual {dual:.3e})")]
    Convergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    /// A factorization or decomposition failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid prior or model configuration (non-SPD covariance, improper density, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Sampler health checks failed.
    #[error("sampler diagnostics failure: {0}")]
    Diagnostics(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Input(format!("{what} is empty")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{what}[{i}] is not finite")));
    }
    Ok(())
}

pub(crate) fn ensure_radius(r: f64) -> Result<()> {
    if r.is_nan() || r <= 0.0 || r.is_infinite() {
        return Err(Error::Domain(format!("radius must be positive and finite, got {r}")));
    }
    Ok(())
}
