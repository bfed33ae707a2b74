//! Command-line driver for `invpress-core`: configuration files, report
//! formats and the subcommands.
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;
