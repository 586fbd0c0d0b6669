use std::fmt;

use ocon_core::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_TRAINING: u8 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: m.to_string(),
        }
    }

    pub fn data(m: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_DATA,
            message: m.to_string(),
        }
    }

    pub fn training(m: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_TRAINING,
            message: m.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Neural(_) | Error::Ocon(_) | Error::Train(_) | Error::Search(_) => CliError::training(e),
            _ => CliError::data(e),
        }
    }
}

/// Routes any core error through [`Error`] to pick its exit code.
pub fn core<E: Into<Error>>(e: E) -> CliError {
    e.into().into()
}
