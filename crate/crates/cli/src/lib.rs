//! Run configuration, grid dumps, sweep reports and the `ovalwig` command
//! line on top of `ovalwig-core`.

pub mod cli;
pub mod config;
pub mod dump;
pub mod error;
pub mod report;

pub use error::{Error, Result};
