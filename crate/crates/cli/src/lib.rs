//! Experiment driver: flat config files, pipeline commands and hashed
//! artifact manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;

pub use config::{parse_config, parse_with_overrides, ConfigError, ExperimentConfig};
pub use pipeline::{execute, run_pipeline, Artifacts, Command, Model, RunError};
