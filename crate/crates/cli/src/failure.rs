use std::fmt;

use simplexdyn::Error;

/// A command failure, carrying the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Parse(String),
    Dimension(String),
    Simulation(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Dimension(_) => 3,
            Failure::Simulation(_) => 4,
            Failure::Verification(_) => 5,
        }
    }

    /// A library error raised while checking the configuration.
    pub fn setup(e: Error) -> Self {
        if is_dimension(&e) {
            Failure::Dimension(e.to_string())
        } else {
            Failure::Parse(e.to_string())
        }
    }

    /// A library error raised while running a validated configuration.
    pub fn run(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Parse(e.to_string()),
            _ if is_dimension(&e) => Failure::Dimension(e.to_string()),
            _ => Failure::Simulation(e.to_string()),
        }
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        Failure::Io(format!("{context}: {e}"))
    }
}

fn is_dimension(e: &Error) -> bool {
    matches!(
        e,
        Error::DimensionMismatch { .. } | Error::BadDimension(_) | Error::WrongDimension { .. } | Error::SizeMismatch(..) | Error::TooLarge(_)
    )
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Failure::Io(m) => ("i/o error", m),
            Failure::Parse(m) => ("invalid configuration", m),
            Failure::Dimension(m) => ("dimension error", m),
            Failure::Simulation(m) => ("simulation failed", m),
            Failure::Verification(m) => ("verification failed", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl std::error::Error for Failure {}
