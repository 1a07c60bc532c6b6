use std::io;
use std::path::Path;

use observer_kit_core::Error as CoreError;
use thiserror::Error;

/// Process exit status. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    CheckFailed = 1,
    AssumptionViolated = 2,
    InputError = 3,
    NumericalFailure = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("invalid input: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            Self::Io { .. } | Self::Format(_) => Status::InputError,
            Self::Core(e) => match e {
                CoreError::Dimension(_) | CoreError::InvalidInput(_) => Status::InputError,
                CoreError::Precondition(_) | CoreError::AssumptionViolation(_) => Status::AssumptionViolated,
                CoreError::NumericalFailure(_) | CoreError::SingularEquation(_) => Status::NumericalFailure,
                CoreError::Divergence { .. } | CoreError::InsufficientData(_) => Status::CheckFailed,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let cases = [
            (CliError::Format("x".into()), 3),
            (CoreError::Dimension("x".into()).into(), 3),
            (CoreError::Precondition("x".into()).into(), 2),
            (CoreError::AssumptionViolation("x".into()).into(), 2),
            (CoreError::NumericalFailure("x".into()).into(), 4),
            (CoreError::SingularEquation("x".into()).into(), 4),
            (
                CoreError::Divergence {
                    step: 3,
                    time: 0.1,
                    detail: "x".into(),
                }
                .into(),
                1,
            ),
        ];
        for (err, code) in cases {
            assert_eq!(err.status().code(), code, "{err}");
        }
    }
}
