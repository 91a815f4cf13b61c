//! Library surface of the CLI so integration tests can drive runs in
//! process.

pub mod config;
pub mod run;
