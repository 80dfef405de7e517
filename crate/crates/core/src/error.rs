use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlmgError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlmgError {
    /// Invalid model or run parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A phase-space point or state argument outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed-form expression whose denominator vanishes at the requested
    /// parameters.
    #[error("singular parameters: {0}")]
    Singular(String),

    /// Parameters outside the range where a closed form is valid.
    #[error("validity error: {0}")]
    Validity(String),

    /// The eigensolver exhausted its iteration budget.
    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} sweeps")]
    NoConvergence { index: usize, iterations: usize },
}

impl AlmgError {
    /// Whether the error is a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, AlmgError::NoConvergence { .. })
    }
}
