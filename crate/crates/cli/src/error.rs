use std::fmt;

use persuasion_core::Error;

pub const EXIT_REPRO_FAILED: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_ZERO_LIKELIHOOD: u8 = 3;
pub const EXIT_CAP_EXCEEDED: u8 = 4;
pub const EXIT_SOLVER: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError::new(EXIT_VALIDATION, message)
    }

    pub fn io(err: std::io::Error) -> Self {
        CliError::validation(format!("i/o error: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::ZeroLikelihoodSignal(_) => EXIT_ZERO_LIKELIHOOD,
            Error::DepthCapExceeded(_) | Error::LeafCapExceeded(_) => EXIT_CAP_EXCEEDED,
            Error::InvalidGrid(_)
            | Error::InfeasibleGrid
            | Error::LinearProgram(_)
            | Error::NotCommonPreferences
            | Error::NotTransparentMotives
            | Error::UnsupportedActionModel(_)
            | Error::DegenerateGeometry(_)
            | Error::NotInHull
            | Error::WeightMismatch(_)
            | Error::TargetInfeasible
            | Error::GammaOutOfRange(_)
            | Error::PreconditionViolated(_) => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        CliError::new(code, e.to_string())
    }
}
