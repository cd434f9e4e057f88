use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// Configuration document error, located at a key and line.
    #[error("line {line}: key `{key}`: {msg}")]
    Parse { line: usize, key: String, msg: String },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular pivot in banded LU at row {row}")]
    SingularPivot { row: usize },

    #[error("solution became non-finite at t = {t}")]
    Divergence { t: f64 },

    #[error(
        "nonlinear iteration did not converge at t = {t} after {} iterations (last change {:.3e})",
        history.len(),
        history.last().copied().unwrap_or(f64::NAN)
    )]
    StepFailure { t: f64, history: Vec<f64> },

    #[error("step {step} (t = {t}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors raised by the time integration itself (as opposed to
    /// bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::StepFailure { .. } | Error::SingularPivot { .. } => {
                true
            }
            Error::AtStep { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
