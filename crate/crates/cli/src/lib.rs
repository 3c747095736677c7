//! File formats, commands and reproduction suites behind the `persuade` binary.

pub mod commands;
pub mod error;
pub mod repro;
pub mod schema;
