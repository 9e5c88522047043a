use std::fmt;
use std::process::ExitCode;

/// Failure of a CLI command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed files.
    Usage(String),
    /// The computation itself refused the input.
    Domain(mds_recover::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Domain(_) => ExitCode::from(3),
        }
    }
}

impl From<mds_recover::Error> for CliError {
    /// Invalid input detected by the library is still a caller mistake.
    fn from(e: mds_recover::Error) -> Self {
        match e {
            mds_recover::Error::InvalidInput(msg) => CliError::Usage(format!("InvalidInput: {msg}")),
            other => CliError::Domain(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Domain(e) => e.fmt(f),
        }
    }
}
