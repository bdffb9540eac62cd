//! Experiment pipeline around `memlstm-core`: dataset loading, the weight and
//! crossbar-program file formats, run configuration and the commands behind
//! the `memlstm` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod program_file;
pub mod weights;

pub use config::{ReportFormat, RunConfig};
pub use error::{Error, Result};
