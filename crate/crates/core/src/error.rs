use thiserror::Error;

/// Errors raised by the filters, solvers and factorizations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid periodic autoregression: {0}")]
    InvalidPar(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Innovation covariance failed the positive-definiteness test.
    #[error("innovation covariance at t={t} is not positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    OmegaNotPd { t: usize, min_eig: f64, max_eig: f64 },

    #[error("periodic Riccati iteration did not converge after {periods} periods (residual {residual:e})")]
    NonConvergence { periods: usize, residual: f64 },

    #[error("model is not periodically stationary (monodromy spectral radius {radius})")]
    NotStationary { radius: f64 },

    #[error("periodic Lyapunov lift is numerically singular (residual {residual:e})")]
    SingularLift { residual: f64 },

    #[error("factorization residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("M is numerically singular (singular value ratio {ratio:e})")]
    MSingular { ratio: f64 },

    #[error("missing (Y, M) history at t={index}")]
    MissingHistory { index: usize },

    #[error("engine initialization failed: {0}")]
    EngineInitFailed(Box<Error>),
}

impl Error {
    /// Stable short name, printed by the command-line tool.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidPar(_) => "InvalidPar",
            Error::Dimension(_) => "Dimension",
            Error::OmegaNotPd { .. } => "OmegaNotPD",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::NotStationary { .. } => "NotStationary",
            Error::SingularLift { .. } => "SingularLift",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::MSingular { .. } => "MSingular",
            Error::MissingHistory { .. } => "MissingHistory",
            Error::EngineInitFailed(_) => "EngineInitFailed",
        }
    }

    /// Innermost error, looking through `EngineInitFailed`.
    pub fn root(&self) -> &Error {
        match self {
            Error::EngineInitFailed(inner) => inner.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
