use thiserror::Error;

/// Failure modes shared across the solvers and metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid cap exceeded: {0}")]
    CapExceeded(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("field is not a normalized density: {0}")]
    NotNormalized(String),

    #[error("density floor undercut: {0}")]
    DensityFloor(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("energy increased during gradient flow at iteration {iteration}: {from} -> {to}")]
    EnergyIncreased { iteration: usize, from: f64, to: f64 },

    #[error("tail fit residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    FitResidual { residual: f64, tolerance: f64 },

    #[error("scattering length is zero within tolerance")]
    ZeroScatteringLength,

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("moment diverged: {0}")]
    MomentDiverged(String),

    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuity(String),

    #[error("paths escaped the domain: {0}")]
    DomainEscape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
