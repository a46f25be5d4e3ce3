//! Files, configuration and command workflows.

use thiserror::Error;

use crate::thermal::ModelError;

pub mod artifact;
pub mod config;
pub mod data;
pub mod run;

pub use artifact::{read_metadata, read_prior_file, transferred_priors, write_draws, write_prior_file, FitArtifact};
pub use config::{BackendConfig, BackendKind, PriorConfig, RegimeKind, RunConfig};
pub use data::{load_csv, read_dataset, write_dataset, CsvOptions};
pub use run::{fit_dataset, run, Command, RunError, RunOutcome};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}: {1}")]
    File(String, #[source] std::io::Error),
    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("non-uniform sampling at row {row}: step {step} s, expected {expected} s")]
    NonUniformSampling { row: usize, step: f64, expected: f64 },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("file spacing is {file_hours} h but dt = {requested} h was requested")]
    StepMismatch { file_hours: f64, requested: f64 },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}
