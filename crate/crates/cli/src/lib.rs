//! Experiment runner for the dfrc beamforming toolkit: figure sweeps written
//! as CSV/JSON tables, plus single-scenario design, evaluation and verification.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod table;

pub use config::{ConfigFile, ExperimentConfig, ExperimentId};
pub use error::CliError;
pub use table::{Format, ResultTable};
