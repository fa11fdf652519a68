//! Scenario files, CSV output and experiment drivers for `platoon-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod output;
pub mod sweep;

pub use config::{ConfigError, ScenarioConfig};
