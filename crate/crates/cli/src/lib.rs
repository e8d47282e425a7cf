//! Experiment runner for the asynchronous saddle-point simulator.
//!
//! A JSON config names a problem instance, the algorithm parameters, the delay
//! model and the evaluation settings; [`run_experiment`] and
//! [`compare_modes`] turn it into CSV series and a JSON summary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, parse_config_str, ExperimentConfig, Overrides};
pub use error::CliError;
pub use experiment::{
    advise_config, audit_config, compare_modes, compute_experiment, run_experiment, CompareReport,
    CompareResult, ExperimentResult, SeriesTable, SummaryReport,
};
