use natspline::SplineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NoSolution(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::NoSolution(_) => 3,
            Self::Numerical(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }
}

impl From<SplineError> for CliError {
    fn from(e: SplineError) -> Self {
        use SplineError::*;
        let msg = e.to_string();
        match e {
            SingularSystem
            | SingularCorner
            | SingularGls
            | EmptyNullspace
            | OverlappingNullspaces
            | InconsistentConstraint
            | BracketTooNarrow { .. } => Self::Numerical(msg),
            _ => Self::Input(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Input(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Input(format!("json error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
