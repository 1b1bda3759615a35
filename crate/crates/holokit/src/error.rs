use holokit_core::Error as CoreError;
use serde::Serialize;

/// Run failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Unreachable(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Serialize)]
struct Record<'a> {
    error: &'a str,
    code: i32,
    message: String,
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Unreachable(_) => 4,
            RunError::Io(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Schema(_) => "schema",
            RunError::Numerical(_) => "numerical",
            RunError::Unreachable(_) => "unreachable",
            RunError::Io(_) => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let r = Record { error: self.kind(), code: self.exit_code(), message: self.to_string() };
        serde_json::to_string(&r).unwrap_or_else(|_| format!("{{\"error\":\"{}\",\"code\":{}}}", self.kind(), self.exit_code()))
    }

    /// Core errors raised while building inputs are schema errors, except
    /// unreachable phases.
    pub fn schema(e: CoreError) -> Self {
        match e {
            CoreError::UnreachablePhase { .. } => RunError::Unreachable(e.to_string()),
            _ => RunError::Schema(e.to_string()),
        }
    }

    /// Core errors raised during computation.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::UnreachablePhase { .. } | CoreError::NotConverged { .. } => RunError::Unreachable(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
