//! Scenario files, preset registry, result output and the `diffsync` CLI.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;
pub mod report;
