//! Library side of the `linesim` binary: configuration schema and artifact
//! serialization, split out so integration tests can exercise them directly.

pub mod config;
pub mod output;
