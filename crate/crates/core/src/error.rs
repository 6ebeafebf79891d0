use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Each variant maps onto one of the CLI exit codes via [`ScgirError::exit_code`].
#[derive(Debug, Error)]
pub enum ScgirError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("batch too small: need at least {needed} rows, got {got}")]
    BatchTooSmall { needed: usize, got: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("training diverged in {phase} at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence {
        phase: &'static str,
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScgirError>;

impl ScgirError {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        ScgirError::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence, 5 I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScgirError::Config(_) => 2,
            ScgirError::Data(_) | ScgirError::Format { .. } => 3,
            ScgirError::Divergence { .. } => 4,
            ScgirError::Io(_) => 5,
            _ => 1,
        }
    }
}
