//! File formats, configuration and the `mcmot` command line on top of
//! [`mcmot_core`].
//!
//! Exit codes: 0 success, 2 configuration error, 3 estimation failure,
//! 4 malformed input, 1 when an output cannot be written.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{CliError, Result};
