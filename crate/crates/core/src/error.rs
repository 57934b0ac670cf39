use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("vertex enumeration supports dimension up to {max}, got {got}")]
    DimensionTooLarge { max: usize, got: usize },
    #[error("feasible parameter set became empty: data inconsistent with the disturbance bound")]
    ModelInconsistency,
    #[error("polytope has {rows} irredundant rows, above the configured cap of {cap}")]
    ComplexityCap { rows: usize, cap: usize },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("solver did not return an optimal point: {0}")]
    NotOptimal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
