//! File formats, parallel sweeps, reports and the `infoprobe` command line
//! on top of [`infoprobe_core`].

pub mod cli;
pub mod config;
pub mod dataio;
pub mod error;
pub mod report;
pub mod sweep;

pub use error::{CliError, Result};
