//! Pipeline behind the `sparsecmd` binary: design, quantize, simulate, report.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod table;

pub use config::{ExperimentConfig, ReferenceSpec};
pub use error::{CliError, CliResult};
