//! Synthetic workloads and trace replay, standing in for a live profiler.

mod replay;
mod workload;

use thiserror::Error;

pub use replay::{replay, ReplayReport};
pub use workload::{generate_workload, random_model, Burst, HotClass, TraceFile, WorkloadSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("cannot connect to {target}: {source}")]
    ConnectionRefused { target: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
