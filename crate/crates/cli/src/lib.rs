//! Configuration, orchestration and deterministic artifacts for the
//! normal-form experiments.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;

pub use commands::{run, Command, Outcome};
pub use config::RunConfig;
pub use error::RunError;
pub use output::emit_plotdata;
