//! File formats, scorer adapters, parallel running and the `daf` command
//! line, on top of [`daf_core`].

pub mod backends;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod llm;
pub mod report;
pub mod runner;

pub use daf_core;
pub use error::{DafError, Result};
