//! File formats, configuration and subcommands of the `semtrans` tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod tnsr;
