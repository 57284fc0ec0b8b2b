//! Batch runner for digit-frequency experiments: TOML configs in, per-seed
//! CSV traces and a stamped JSON report out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
