use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode subset: {0}")]
    InvalidSubset(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("unphysical state: symplectic eigenvalue {value} is below 1/2")]
    Unphysical { value: f64 },

    #[error("wrong arity: expected {expected} mode(s), got {got}")]
    WrongArity { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("empty bath: at least one oscillator is required")]
    EmptyBath,

    #[error("unstable coupling: potential matrix has minimum eigenvalue {min_eigenvalue:e}")]
    Unstable { min_eigenvalue: f64 },

    #[error("reduced channel is not completely positive (margin {0:e})")]
    NotCompletelyPositive(f64),

    #[error("invalid fraction {0}: must lie in (0, 1]")]
    InvalidFraction(f64),

    #[error("config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),

    #[error("numerical consistency failure: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for errors raised while validating input before any heavy computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::EmptyBath)
    }
}
