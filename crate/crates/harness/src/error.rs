use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rangewalk::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("report error: {0}")]
    Report(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Window or sampling budget ran out. Experiments exclude the trial instead
/// of aborting the run.
pub fn is_budget(e: &rangewalk::Error) -> bool {
    use rangewalk::Error as E;
    matches!(
        e,
        E::BudgetExhausted { .. }
            | E::NeedsExtension { .. }
            | E::WindowExhausted { .. }
            | E::HorizonTooShort { .. }
            | E::SamplingFailed { .. }
            | E::NoCutTimeInCore { .. }
            | E::TooFewCutTimes { .. }
    )
}

impl HarnessError {
    /// Process exit code: 2 for bad input or a failed validation, 3 when a
    /// budget ran out, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Validation(_) => 2,
            HarnessError::Core(rangewalk::Error::InvalidParameter(_)) => 2,
            HarnessError::Core(e) if is_budget(e) => 3,
            _ => 1,
        }
    }
}
