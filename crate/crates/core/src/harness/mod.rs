//! Configuration, experiment drivers and report files.
//!
//! Everything the command-line tool does is reachable from here, so examples and tests
//! can run the same experiments without spawning a process.

pub mod config;
pub mod experiments;
pub mod io;
pub mod stats;

pub use config::{ExperimentConfig, Resolved, RunMode};
pub use experiments::{
    benchmark, closed_loop, optimize, rbm_error_study, simulate, BenchmarkReport, BenchmarkRow, ErrorMetric, ErrorRow,
    ErrorStudyReport, OptimizeOutput, SimulationOutput,
};
pub use stats::Band;
