use dfrc::designs::DesignError;
use dfrc::metrics::MetricsError;
use dfrc::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) => 2,
            Self::Solver(_) => 3,
            Self::Config(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        use DesignError::*;
        match e {
            Scenario(_) | WrongTarget(_) => Self::Config(e.to_string()),
            Infeasible { .. } | DegenerateChannel | ZeroUsefulPower { .. } => {
                Self::Infeasible(e.to_string())
            }
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::Solver(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::TooManyStreams { .. } | SimError::WrongTarget => Self::Config(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}
