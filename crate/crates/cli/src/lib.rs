//! Experiment driver for the `doubly-scenery` engine: configuration, the
//! named experiments and their reports.

pub mod config;
pub mod experiments;

pub use config::{ExperimentConfig, LawSpec, LawsConfig};
pub use experiments::{run, Experiment};
