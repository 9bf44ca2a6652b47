use std::path::PathBuf;

use reliance_core::ValidationReport;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("validation failed with {} error(s)", .0.errors.len())]
    Validation(ValidationReport),
    #[error("degenerate analysis: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] reliance_core::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> CliError {
        CliError::Parse { path: path.into(), message: message.to_string() }
    }

    /// 1 for bad input or configuration, 2 when the data cannot support the analysis.
    pub fn exit_code(&self) -> i32 {
        use reliance_core::Error as E;
        match self {
            CliError::Degenerate(_) => 2,
            CliError::Core(E::DegenerateSplit(_) | E::DegenerateDelta(_) | E::UndefinedReliance) => 2,
            _ => 1,
        }
    }
}
