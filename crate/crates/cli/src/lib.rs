//! Scenario runner for the gain/loss DNLS lattice.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;
pub mod run;
pub mod scenario;

pub use error::{CliError, CliResult};
