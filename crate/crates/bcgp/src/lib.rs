//! File formats, configuration, experiment runner and CLI on top of `bcgp-core`.

pub mod cli;
pub mod config;
pub mod formats;
pub mod runner;
