//! Benchmark front end: configuration, scenario execution, parameter scans
//! and CSV emission for the `oqs-core` master-equation engine.

pub mod cli;
pub mod config;
pub mod csv;
pub mod error;
pub mod plot;
pub mod scan;
pub mod scenario;

pub use error::{BenchError, Result};
