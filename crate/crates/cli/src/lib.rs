//! Command line driver: configuration ingestion, subcommand dispatch,
//! figure sweeps and report emission.

// `!(x > 0.0)` is used on purpose so that NaN fails domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use error::{CliError, Result};
