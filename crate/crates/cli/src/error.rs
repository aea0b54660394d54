use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing or unreadable inputs, malformed files.
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Run(#[from] dsmp::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

/// Treats any failure while reading `path` as an input error.
pub fn reading<T>(path: &Path, r: dsmp::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e.root() {
        dsmp::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Input(format!("{}: no such file", path.display()))
        }
        _ => CliError::Input(format!("{}: {e}", path.display())),
    })
}

pub fn require_exists(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}: no such file or directory", path.display())))
    }
}
