//! Config ingestion and every file format the tool reads or writes.

pub mod config;
pub mod files;

pub use config::{ConfigError, DesignInputs, LayoutSpec, RunConfig};
