//! Host-side companion to `homoglab-core`: coefficient and config files,
//! report writers, a thread-pool executor and the command implementations
//! behind the `homoglab` binary.

pub mod commands;
pub mod error;
pub mod exec;
pub mod files;
pub mod report;

pub use error::CliError;
pub use exec::RayonExecutor;
