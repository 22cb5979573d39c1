//! Benchmark harness for the pop-smr reclaimers: prefill, timed mixed
//! workload, stall injection and long-running reads, with CSV output.

pub mod config;
pub mod error;
pub mod matrix;
pub mod run;

pub use config::{BenchConfig, DsKind, ReclaimerKind, StallSpec};
pub use error::BenchError;
pub use matrix::{run_matrix, MatrixReport, MatrixSpec, Row, Summary, COLUMNS};
pub use run::{run_lrr, run_trial, BenchResult, Sample};
