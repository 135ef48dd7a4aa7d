//! Library behind the `toom` binary: run configuration, subcommands and
//! simulation-versus-theory reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use config::{Mode, PartialRunConfig, RunConfig, SCHEMA_VERSION};
pub use error::{CliError, CliResult};
pub use report::{ComparisonReport, Tolerances};
