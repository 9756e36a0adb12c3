//! Experiment runner behind the `homodyne` binary: configuration, pipeline
//! stages and their on-disk layout.

pub mod commands;
pub mod config;
pub mod error;
