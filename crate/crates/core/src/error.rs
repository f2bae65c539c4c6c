use thiserror::Error;

/// Errors produced by the tree model, the closed-form evaluators and the
/// search machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cell path: {0}")]
    InvalidCell(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("feasibility projection did not converge")]
    ProjectionFailed,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg.into()))
    }
}
