//! Experiment runner for the dispersion compensator: configuration
//! ingestion, the length/bandwidth region, broadening-versus-stages sweeps,
//! the worked single-channel scenario and deterministic CSV/JSON output.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod runs;

pub use config::{ExperimentConfig, Resolved};
pub use error::{RunError, RunResult};
