use thiserror::Error;

/// Exit status: all enabled checks passed.
pub const EXIT_PASS: i32 = 0;
/// A check failed or a precondition of a check did not hold.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// The scenario file could not be read or parsed.
pub const EXIT_CONFIG: i32 = 2;
/// The quadrature did not resolve the functionals.
pub const EXIT_RESOLUTION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] hypodecay_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(hypodecay_core::Error::UnderResolved(_)) => EXIT_RESOLUTION,
            CliError::Core(hypodecay_core::Error::Parse { .. }) => EXIT_CONFIG,
            CliError::Core(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
