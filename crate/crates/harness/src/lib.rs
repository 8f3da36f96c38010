//! Experiment harness: environment generation, search runs against
//! dynamic-programming oracles, and line-delimited result records.

pub mod config;
pub mod env;
pub mod runner;

pub use config::{EnvSpec, ExperimentConfig, Mode, SearchSpec};
pub use env::{EnvGenerator, EnvRegistry, Environment};
pub use runner::{
    append_results, describe, parse_results, render_results, run, run_with, OutputLine,
    ResultRecord,
};
