//! Command-line front end: file formats, configuration and the `simulate`,
//! `fit` and `evaluate` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod io;
pub mod report;
