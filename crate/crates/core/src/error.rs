use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the domain of a mathematical operation (non-finite
    /// entries, infinite divergence, non-positive gain, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A transfer function was evaluated on (or numerically at) a pole.
    #[error("transfer function evaluated at a pole (omega = {omega})")]
    Pole { omega: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// A state vector does not match the partition its learning rule expects.
    #[error("invalid state structure: {0}")]
    Structure(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// The integrated state stopped being finite.
    #[error("numerical divergence at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            actual,
            context,
        })
    }
}
