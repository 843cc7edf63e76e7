use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sector dimension {dim} exceeds the configured cap of {cap}")]
    DimensionOverflow { dim: u128, cap: usize },
    #[error("site index {site} out of range for a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Krylov propagation failed: {0}")]
    Propagation(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
