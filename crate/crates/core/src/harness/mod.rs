//! Reproducible experiments: configuration, seeding, orchestration and
//! output bookkeeping.

pub mod config;
pub mod manifest;
mod run;
pub mod seed;

pub use config::{load_config, ExperimentConfig, ModelSpec, Reps};
pub use manifest::{OutputFile, RunManifest};
pub use run::{run, Subcommand};
pub use seed::derive_seed;
