//! Command-line front end: configuration, presets, mode dispatch and
//! result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{load_config, load_with, parse_with, Format, Mode, Overrides, RunConfig};
pub use error::{CliError, CliResult};
pub use run::run;
