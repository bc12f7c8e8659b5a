//! Configuration and run orchestration for the `dgshock` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig, ScenarioKind};
