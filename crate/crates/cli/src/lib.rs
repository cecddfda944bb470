//! Benchmark harness over the AGV simulator: scenario files with sweep
//! axes, concurrent runs with deterministic output order, KPI tables,
//! rule comparisons with SVG charts, Q-learning training and trace replay.

pub mod commands;
pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use error::{CliError, Result};
