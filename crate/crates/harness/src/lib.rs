//! Command-line orchestration for the Zvonkin-transform laboratory: experiment
//! configs and presets, stage runners with hashed artifact manifests, and the
//! reduced-scale verification suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod verify;

pub use config::{preset, ExperimentConfig, Overrides};
pub use error::{HarnessError, HarnessResult};
pub use pipeline::{execute, Command, Outcome};
