use std::fmt;
use std::process::ExitCode;

use stockgan_core::TrainError;

/// Error class, one per documented exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Io = 1,
    Config = 2,
    Data = 3,
    Divergence = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(class: Class, source: impl Into<anyhow::Error>) -> Self {
        Self {
            class,
            source: source.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(Class::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self::new(Class::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let class = match &e {
            TrainError::Config(_) => Class::Config,
            TrainError::DivergenceDetected { .. } => Class::Divergence,
            _ => Class::Data,
        };
        Self::new(class, e)
    }
}

pub trait Classify<T> {
    fn or_class(self, class: Class, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_class(self, class: Class, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(class, e.into().context(context())))
    }
}
