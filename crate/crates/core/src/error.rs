use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("noise model violates the ill-posedness assumption: {0}")]
    AssumptionViolated(String),

    #[error("noise model has not been certified; call certify() first")]
    NotCertified,

    #[error("no sampler available for {0}")]
    MissingSampler(&'static str),

    #[error("Fourier-weighted kernel integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("synthesis band too narrow: {0}")]
    BandTooNarrow(String),

    #[error("bandwidth grid is empty: {0}")]
    EmptyGrid(String),

    #[error("grid is not closed under coordinatewise max: {0}")]
    LatticeClosureViolated(String),

    #[error("quadrature grid misses {missing:.3e} of the target mass")]
    SupportNotCovered { missing: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("unknown kernel '{name}' (available: {available})")]
    UnknownKernel { name: String, available: String },

    #[error("custom function evaluation failed: {0}")]
    Evaluation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable, machine-readable kind used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AssumptionViolated(_) => "assumption-violated",
            Error::NotCertified => "not-certified",
            Error::MissingSampler(_) => "missing-sampler",
            Error::DivergentIntegral(_) => "divergent-integral",
            Error::BandTooNarrow(_) => "band-too-narrow",
            Error::EmptyGrid(_) => "empty-grid",
            Error::LatticeClosureViolated(_) => "lattice-closure-violated",
            Error::SupportNotCovered { .. } => "support-not-covered",
            Error::EmptySample => "empty-sample",
            Error::UnknownKernel { .. } => "unknown-kernel",
            Error::Evaluation(_) => "evaluation-error",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidInput(_) => "invalid-input",
            Error::Parse(_) => "parse-error",
            Error::Io(_) => "io-error",
        }
    }
}
