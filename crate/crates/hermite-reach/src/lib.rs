//! Command-line front end, file formats and a rayon executor for
//! `hermite-reach-core`.
//!
//! The binary is a thin wrapper around [`commands::run`]; everything it does
//! is reachable from this library so integration tests can drive the same
//! code paths.

pub mod cli;
pub mod commands;
pub mod config;
pub mod ensemble;
mod error;
pub mod exec;
pub mod io;

pub use error::CliError;
pub use exec::Rayon;
