use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] peoc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("`{key}`: {message}")]
    Range { key: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        use peoc_core::Error as E;
        match self {
            BenchError::Usage(_) => 1,
            BenchError::Parse { .. } | BenchError::UnknownKey { .. } | BenchError::Range { .. } => 2,
            BenchError::Io { .. } | BenchError::Data { .. } => 2,
            BenchError::Core(e) => match e {
                E::InvalidConfig(_) => 1,
                E::UnsatisfiableSeed { .. } | E::SteppedTerminalState | E::ShapeMismatch { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
