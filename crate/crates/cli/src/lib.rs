//! File formats and commands behind the `observer-kit` binary.

pub mod commands;
pub mod error;
pub mod files;
pub mod report;

pub use commands::{Outcome, SimulateOptions};
pub use error::{CliError, Status};
pub use files::{ConfigDocument, DesignDocument};
