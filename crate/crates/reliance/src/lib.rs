//! File formats, reports and the command-line front end for `reliance-core`.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod report;
pub mod schema;

pub use error::{CliError, Result};
