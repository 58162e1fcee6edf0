use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no solvable level for seed {seed} after {attempts} attempts")]
    UnsatisfiableSeed { seed: u64, attempts: u32 },
    #[error("step called on a terminal state")]
    SteppedTerminalState,
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("need at least {k} points, got {got}")]
    TooFewPoints { k: usize, got: usize },
    #[error("ROC curve needs both classes (positives: {positives}, negatives: {negatives})")]
    SingleClassInput { positives: usize, negatives: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed parameter blob: {0}")]
    Format(String),
    #[error("no process-repeat passed the performance check")]
    NoAcceptedRepeats,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
