//! Command-line front end and file formats for `spgls-core`.

pub mod commands;
pub mod io;
pub mod record;

pub use commands::{run, CliError, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK};
