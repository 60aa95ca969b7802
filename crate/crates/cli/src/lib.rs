//! Library surface of the `sgdchain` binary: run specifications, command
//! implementations, and the error-to-exit-code mapping.

pub mod commands;
pub mod spec;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Certification(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Certification(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Certification(m) => m,
        }
    }
}
