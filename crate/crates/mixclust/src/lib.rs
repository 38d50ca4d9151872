//! IO, file formats and the operator surface for the `mixclust-core`
//! separation pipeline: WAV and manifest handling, dataset materialization,
//! checkpoint files, manifest-driven training, batch evaluation and the CLI.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod report;
pub mod training;
pub mod wav;

pub use error::{AppError, Result};
