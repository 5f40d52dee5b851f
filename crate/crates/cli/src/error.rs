use std::process::ExitCode;

use gaborheat::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("hypothesis check failed: {}", .0.join("; "))]
    Hypotheses(Vec<String>),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidGrid(_)
                | Error::GridMismatch
                | Error::UnsupportedDimension(_)
                | Error::ZeroWindow
                | Error::ZeroNorm(_)
                | Error::InvalidArgument(_)
                | Error::Expression(_) => 2,
                Error::NonFinite(_)
                | Error::BlowUp { .. }
                | Error::DegenerateFit(_)
                | Error::NonConvergence { .. }
                | Error::EmptyCone => 3,
                Error::Io(_) | Error::Csv(_) => 1,
            },
            CliError::Hypotheses(_) => 4,
            CliError::Io(_) => 1,
        })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(Error::Csv(e))
    }
}
