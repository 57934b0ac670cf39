use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error("the program at t = 0 is not solvable ({0}); the scenario cannot start")]
    InitiallyInfeasible(String),
    #[error(transparent)]
    Core(#[from] asmpc_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed file: {0}")]
    Format(String),
}
