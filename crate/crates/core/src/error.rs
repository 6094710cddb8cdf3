use thiserror::Error;

/// Errors produced by the unmixing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("component {index} is on the simplex boundary (value {value:e})")]
    Boundary { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("kernel matrix is ill-conditioned: Cholesky failed with jitter up to {max_jitter:e}")]
    IllConditioned { max_jitter: f64 },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error(
        "sampler diverged at step {step}: non-finite energy; try a step size smaller than {step_size:e}"
    )]
    Divergence { step: usize, step_size: f64 },

    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("degenerate kernel density bandwidth")]
    DegenerateBandwidth,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IllConditioned { .. } | Error::Singular(_) | Error::Divergence { .. } => 2,
            _ => 1,
        }
    }

    /// Short machine-readable tag used in `--error-json` output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Boundary { .. } => "boundary",
            Error::InvalidInput(_) => "invalid-input",
            Error::Domain(_) => "domain",
            Error::IllConditioned { .. } => "ill-conditioned-kernel",
            Error::Singular(_) => "singular-system",
            Error::Divergence { .. } => "divergence",
            Error::TooFewSamples { .. } => "too-few-samples",
            Error::DegenerateBandwidth => "degenerate-bandwidth",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
