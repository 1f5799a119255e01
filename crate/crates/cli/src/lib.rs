//! Pipeline driver for the spillover estimator: configuration, the
//! per-combination estimation and response grid, and file output with a
//! hashed manifest.

pub mod config;
pub mod export;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use manifest::Manifest;
pub use pipeline::{run_on_dataset, run_pipeline, run_preset, RunOutcome};
