use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input is outside the domain of the model (bad parameters, a reward that is
    /// not decreasing, a distribution that does not integrate to one, ...).
    #[error("invalid input: {0}")]
    Domain(String),
    /// A target distribution or design problem admits no admissible reward.
    #[error("not realizable: {0}")]
    Infeasible(String),
    /// An iterative solver stopped without meeting its tolerance.
    #[error("no convergence: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}
