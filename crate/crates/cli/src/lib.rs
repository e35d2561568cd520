//! Configuration parsing, command execution and report rendering for the `swd` tool.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{emit_config, parse_config, Command, RawConfig, RunConfig};
pub use error::CliError;
pub use report::{emit_pairs, emit_report, emit_scatter};
pub use run::{execute, Outcome};
